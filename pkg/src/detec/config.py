"""Run configuration: one TOML file drives every CLI command.

The file is split into sections mirroring the pipeline stages. Unknown
keys anywhere are hard errors, so a typo can never silently fall back to
a default. All keys are optional except where noted.

Top level
    seed        integer rebased into every stochastic component (default 0)
    output_dir  directory command outputs land in (default "out")

[plant]   exactly one source
    preset      bundled plant name ("aircraft")
    A, B        inline matrices as row-major nested arrays

[experiment]   open-loop data collection (see data_collection)
    sampling_period, samples, input_range, x0_range, x1_mode,
    integration_step, hold, seed, plus
    dbar         disturbance bound during collection (default 0.0)
    disturbance  signal kind; defaults to "piecewise_random" when
                 dbar > 0 and "zero" otherwise

[design]   synthesis knobs (see synthesis.DesignOptions)
    omega       scalar c meaning c*I, or a full SPD matrix (default 7.0)
    alpha_min, trigger_objective, reoptimize_gamma, s_cap, s_floor,
    design_slack

[etm]   trigger settings the synthesis stage does not fix
    fbar (default 100.0), mode (default "plain"), theta (default 0.0)

[scenario]   closed-loop validation run (see sim_engine.Scenario)
    x0 (required for inline plants; presets ship a default), T, h_sim,
    tol_event, hold, seed, plus dbar/disturbance with the same
    convention as [experiment]; dbar defaults to the experiment value

[sweep]   grid for `detec sweep`
    parameter   "dbar" or "theta"
    values      nonempty list of numbers

[report]
    summaries   explicit list of summary JSON paths; when absent the
                report command scans output_dir for summary files

Seed plumbing: section-level ``seed`` keys override the top-level one;
the ``--seed`` command-line flag rebases everything, including explicit
section seeds. The scenario disturbance stream is offset by one so the
validation run never replays the collection noise.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .data_collection import X1_MODES, ExperimentConfig
from .etm import ETM_MODES
from .exceptions import ConfigError
from .synthesis import DesignOptions
from .system_model import DISTURBANCE_KINDS, DisturbanceSpec, LinearSystem, aircraft_model

# preset name -> (plant factory, default initial state for [scenario].x0)
PRESETS = {
    "aircraft": (aircraft_model, (10.0, -5.0, 8.0)),
}

SWEEP_PARAMETERS = ("dbar", "theta")


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration shared by all CLI commands."""

    sys: LinearSystem
    plant_name: str  # preset name, or "inline"
    experiment: ExperimentConfig
    dbar: float  # disturbance bound backing the data uncertainty set
    design: DesignOptions
    fbar: float
    mode: str
    theta: float
    x0: np.ndarray
    T: float
    h_sim: float
    tol_event: float
    scenario_disturbance: DisturbanceSpec
    output_dir: Path
    seed: int
    config_sha256: str
    sweep_parameter: Optional[str] = None
    sweep_values: tuple = ()
    report_summaries: tuple = ()

    def meta(self) -> dict:
        """Provenance stamp embedded in every output file."""
        return {
            "config_sha256": self.config_sha256,
            "version": __version__,
            "seed": self.seed,
        }


def _err(section: str, msg: str) -> ConfigError:
    where = f"[{section}]" if section else "top level"
    return ConfigError(f"{where}: {msg}")


def _check_no_leftovers(section: str, table: dict) -> None:
    if table:
        keys = ", ".join(repr(k) for k in sorted(table))
        raise _err(section, f"unknown key(s) {keys}")


def _as_float(section: str, key: str, v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise _err(section, f"{key} must be a number, got {v!r}")
    return float(v)


def _as_int(section: str, key: str, v) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise _err(section, f"{key} must be an integer, got {v!r}")
    return v


def _as_str(section: str, key: str, v, allowed=None) -> str:
    if not isinstance(v, str):
        raise _err(section, f"{key} must be a string, got {v!r}")
    if allowed is not None and v not in allowed:
        raise _err(section, f"{key} must be one of {allowed}, got {v!r}")
    return v


def _as_bool(section: str, key: str, v) -> bool:
    if not isinstance(v, bool):
        raise _err(section, f"{key} must be true or false, got {v!r}")
    return v


def _as_pair(section: str, key: str, v) -> tuple[float, float]:
    if not isinstance(v, list) or len(v) != 2:
        raise _err(section, f"{key} must be a two-element array, got {v!r}")
    return (_as_float(section, key, v[0]), _as_float(section, key, v[1]))


def _as_vector(section: str, key: str, v) -> np.ndarray:
    if not isinstance(v, list) or not v:
        raise _err(section, f"{key} must be a nonempty array of numbers")
    return np.array([_as_float(section, key, e) for e in v])


def _as_matrix(section: str, key: str, v) -> np.ndarray:
    if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
        raise _err(section, f"{key} must be a nested array (list of rows)")
    rows = [[_as_float(section, key, e) for e in r] for r in v]
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise _err(section, f"{key} rows must all have the same length")
    return np.array(rows)


def _build_plant(table: dict) -> tuple[LinearSystem, str, Optional[tuple]]:
    preset = table.pop("preset", None)
    A = table.pop("A", None)
    B = table.pop("B", None)
    _check_no_leftovers("plant", table)
    if preset is not None and (A is not None or B is not None):
        raise _err("plant", "give either 'preset' or inline 'A'/'B', not both")
    if preset is not None:
        name = _as_str("plant", "preset", preset, allowed=tuple(PRESETS))
        factory, default_x0 = PRESETS[name]
        return factory(), name, default_x0
    if A is None or B is None:
        raise _err("plant", "an inline plant needs both 'A' and 'B'")
    try:
        sys = LinearSystem(A=_as_matrix("plant", "A", A), B=_as_matrix("plant", "B", B))
    except ValueError as exc:
        raise _err("plant", str(exc)) from exc
    return sys, "inline", None


def _disturbance(section: str, table: dict, default_dbar: float, seed: int) -> tuple[DisturbanceSpec, float]:
    dbar = _as_float(section, "dbar", table.pop("dbar", default_dbar))
    default_kind = "piecewise_random" if dbar > 0.0 else "zero"
    kind = _as_str(
        section, "disturbance", table.pop("disturbance", default_kind), allowed=DISTURBANCE_KINDS
    )
    hold = _as_float(section, "hold", table.pop("hold", 0.01))
    try:
        spec = DisturbanceSpec(kind=kind, dbar=dbar, seed=seed, hold=hold)
    except ValueError as exc:
        raise _err(section, str(exc)) from exc
    return spec, dbar


def load_config(path, out_override=None, seed_override: Optional[int] = None) -> RunConfig:
    """Parse and validate a TOML run configuration.

    ``out_override`` and ``seed_override`` implement the ``--out`` and
    ``--seed`` command-line flags. Raises :class:`ConfigError` on any
    syntax problem, unknown key, or invalid value.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    sha = hashlib.sha256(raw).hexdigest()
    try:
        doc = tomllib.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: not valid TOML: {exc}") from exc

    seed = _as_int("", "seed", doc.pop("seed", 0))
    if seed_override is not None:
        seed = seed_override
    if seed < 0:
        raise _err("", "seed must be nonnegative")
    output_dir = Path(_as_str("", "output_dir", doc.pop("output_dir", "out")))
    if out_override is not None:
        output_dir = Path(out_override)

    plant_tbl = doc.pop("plant", {})
    exp_tbl = doc.pop("experiment", {})
    design_tbl = doc.pop("design", {})
    etm_tbl = doc.pop("etm", {})
    scen_tbl = doc.pop("scenario", {})
    sweep_tbl = doc.pop("sweep", None)
    report_tbl = doc.pop("report", {})
    _check_no_leftovers("", doc)
    for name, tbl in (
        ("plant", plant_tbl),
        ("experiment", exp_tbl),
        ("design", design_tbl),
        ("etm", etm_tbl),
        ("scenario", scen_tbl),
        ("report", report_tbl),
    ):
        if not isinstance(tbl, dict):
            raise _err("", f"'{name}' must be a section, not a value")

    sys, plant_name, preset_x0 = _build_plant(dict(plant_tbl))

    # --- experiment ---------------------------------------------------
    exp = dict(exp_tbl)
    exp_seed = _as_int("experiment", "seed", exp.pop("seed", seed))
    if seed_override is not None:
        exp_seed = seed_override
    exp_dist, dbar = _disturbance("experiment", exp, 0.0, exp_seed)
    kwargs = {}
    for key, conv in (
        ("sampling_period", _as_float),
        ("samples", _as_int),
        ("integration_step", _as_float),
    ):
        if key in exp:
            kwargs[key] = conv("experiment", key, exp.pop(key))
    for key in ("input_range", "x0_range"):
        if key in exp:
            kwargs[key] = _as_pair("experiment", key, exp.pop(key))
    if "x1_mode" in exp:
        kwargs["x1_mode"] = _as_str("experiment", "x1_mode", exp.pop("x1_mode"), allowed=X1_MODES)
    _check_no_leftovers("experiment", exp)
    try:
        experiment = ExperimentConfig(disturbance=exp_dist, seed=exp_seed, **kwargs)
    except ValueError as exc:
        raise _err("experiment", str(exc)) from exc

    # --- design -------------------------------------------------------
    des = dict(design_tbl)
    omega_raw = des.pop("omega", 7.0)
    if isinstance(omega_raw, list):
        omega = _as_matrix("design", "omega", omega_raw)
    else:
        omega = _as_float("design", "omega", omega_raw) * np.eye(sys.n)
    dkw = {}
    for key, conv in (
        ("alpha_min", _as_float),
        ("s_cap", _as_float),
        ("s_floor", _as_float),
        ("design_slack", _as_float),
    ):
        if key in des:
            dkw[key] = conv("design", key, des.pop(key))
    if "trigger_objective" in des:
        dkw["trigger_objective"] = _as_str(
            "design", "trigger_objective", des.pop("trigger_objective"),
            allowed=("min_beta", "max_margin"),
        )
    if "reoptimize_gamma" in des:
        dkw["reoptimize_gamma"] = _as_bool("design", "reoptimize_gamma", des.pop("reoptimize_gamma"))
    _check_no_leftovers("design", des)
    try:
        design = DesignOptions(omega=omega, **dkw)
    except ValueError as exc:
        raise _err("design", str(exc)) from exc

    # --- etm ----------------------------------------------------------
    etm = dict(etm_tbl)
    fbar = _as_float("etm", "fbar", etm.pop("fbar", 100.0))
    mode = _as_str("etm", "mode", etm.pop("mode", "plain"), allowed=ETM_MODES)
    theta = _as_float("etm", "theta", etm.pop("theta", 0.0))
    _check_no_leftovers("etm", etm)
    if fbar <= 0.0:
        raise _err("etm", "fbar must be positive")
    if mode in ("uniform", "logarithmic") and theta <= 0.0:
        raise _err("etm", f"mode {mode!r} needs theta > 0")
    if theta < 0.0:
        raise _err("etm", "theta must be nonnegative")

    # --- scenario -----------------------------------------------------
    scen = dict(scen_tbl)
    scen_seed = _as_int("scenario", "seed", scen.pop("seed", seed + 1))
    if seed_override is not None:
        scen_seed = seed_override + 1
    scen_dist, _ = _disturbance("scenario", scen, dbar, scen_seed)
    if "x0" in scen:
        x0 = _as_vector("scenario", "x0", scen.pop("x0"))
    elif preset_x0 is not None:
        x0 = np.array(preset_x0)
    else:
        raise _err("scenario", "x0 is required for an inline plant")
    if x0.shape[0] != sys.n:
        raise _err("scenario", f"x0 has length {x0.shape[0]}, plant expects {sys.n}")
    T = _as_float("scenario", "T", scen.pop("T", 5.0))
    h_sim = _as_float("scenario", "h_sim", scen.pop("h_sim", 1e-3))
    tol_event = _as_float("scenario", "tol_event", scen.pop("tol_event", 1e-9))
    _check_no_leftovers("scenario", scen)
    if not T > 0.0:
        raise _err("scenario", "T must be positive")
    if not 0.0 < h_sim <= T:
        raise _err("scenario", "need 0 < h_sim <= T")
    if not 0.0 < tol_event <= h_sim:
        raise _err("scenario", "need 0 < tol_event <= h_sim")

    # --- sweep --------------------------------------------------------
    sweep_parameter = None
    sweep_values: tuple = ()
    if sweep_tbl is not None:
        if not isinstance(sweep_tbl, dict):
            raise _err("", "'sweep' must be a section, not a value")
        sw = dict(sweep_tbl)
        if "parameter" not in sw:
            raise _err("sweep", "parameter is required ('dbar' or 'theta')")
        sweep_parameter = _as_str("sweep", "parameter", sw.pop("parameter"), allowed=SWEEP_PARAMETERS)
        values = sw.pop("values", [])
        _check_no_leftovers("sweep", sw)
        if not isinstance(values, list) or not values:
            raise _err("sweep", "values must be a nonempty array of numbers")
        sweep_values = tuple(_as_float("sweep", "values", v) for v in values)

    # --- report -------------------------------------------------------
    rep = dict(report_tbl)
    summaries_raw = rep.pop("summaries", [])
    _check_no_leftovers("report", rep)
    if not isinstance(summaries_raw, list):
        raise _err("report", "summaries must be an array of paths")
    report_summaries = tuple(_as_str("report", "summaries", s) for s in summaries_raw)

    return RunConfig(
        sys=sys,
        plant_name=plant_name,
        experiment=experiment,
        dbar=dbar,
        design=design,
        fbar=fbar,
        mode=mode,
        theta=theta,
        x0=x0,
        T=T,
        h_sim=h_sim,
        tol_event=tol_event,
        scenario_disturbance=scen_dist,
        output_dir=output_dir,
        seed=seed,
        config_sha256=sha,
        sweep_parameter=sweep_parameter,
        sweep_values=sweep_values,
        report_summaries=report_summaries,
    )


def with_parameter(cfg: RunConfig, parameter: str, value: float) -> RunConfig:
    """Derive a single sweep-point configuration from the base one.

    A ``dbar`` point rescales both the collection and the validation
    disturbance (and the data uncertainty bound with them); a ``theta``
    point only changes the quantizer resolution.
    """
    if parameter == "dbar":
        if value < 0.0:
            raise ConfigError(f"sweep dbar value must be nonnegative, got {value}")
        exp_dist = replace(cfg.experiment.disturbance, dbar=value)
        scen_dist = replace(cfg.scenario_disturbance, dbar=value)
        return replace(
            cfg,
            experiment=replace(cfg.experiment, disturbance=exp_dist),
            dbar=value,
            scenario_disturbance=scen_dist,
        )
    if parameter == "theta":
        if cfg.mode not in ("uniform", "logarithmic"):
            raise ConfigError("a theta sweep needs [etm] mode 'uniform' or 'logarithmic'")
        if value <= 0.0:
            raise ConfigError(f"sweep theta value must be positive, got {value}")
        return replace(cfg, theta=value)
    raise ConfigError(f"unknown sweep parameter {parameter!r}")
