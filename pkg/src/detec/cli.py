"""Command-line front end: collect -> synthesize -> simulate -> sweep -> report.

Every command takes the same flags::

    detec <command> --config run.toml [--out DIR] [--seed N]

and reads/writes fixed file names inside the output directory, so the
commands chain without passing paths around:

    data.csv        collected samples           (collect)
    synthesis.json  gain + trigger + certificates (synthesize)
    trace.csv, events.txt, summary.json         (simulate)
    sweep/point_NNN/*, sweep.csv                (sweep)
    report.txt                                  (report)

Exit codes: 0 success, 2 infeasibility (uninformative data or an LMI
stage with no solution), 3 validation (bad config or file), 4 numerical
failure (divergence, event storm). Outputs carry the config hash and
tool version; nothing embeds a timestamp, so a rerun from the same
config and seed is byte-identical.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import RunConfig, load_config, with_parameter
from .data_collection import build_matrices, check_rank, load_samples, run_experiment, save_samples
from .etm import EtmConfig
from .exceptions import (
    ConfigError,
    DataRankError,
    DetecError,
    InfeasibleError,
    NumericalError,
    ZenoSuspectError,
)
from .sim_engine import Scenario, analyze_trace, run_closed_loop, save_events, save_trace
from .synthesis import load_result, save_result, synthesize

DATA_FILE = "data.csv"
SYNTH_FILE = "synthesis.json"
TRACE_FILE = "trace.csv"
EVENTS_FILE = "events.txt"
SUMMARY_FILE = "summary.json"
SWEEP_DIR = "sweep"
SWEEP_FILE = "sweep.csv"
REPORT_FILE = "report.txt"

# fraction of the horizon (from the end) averaged into final_residual
TAIL_WINDOW = 0.1


def _clean(x):
    """Make a value JSON-safe: non-finite floats become null."""
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _print_warnings(caught) -> None:
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)


# ----------------------------------------------------------------- collect


def cmd_collect(cfg: RunConfig, out: Path) -> int:
    """Run the open-loop experiment, write data.csv, print the rank verdict."""
    samples = run_experiment(cfg.sys, cfg.experiment)
    data = build_matrices(samples, x1_mode=cfg.experiment.x1_mode, dbar=cfg.dbar)
    out.mkdir(parents=True, exist_ok=True)
    save_samples(out / DATA_FILE, samples, meta=cfg.meta())
    ok = check_rank(data.U0, data.X0)
    verdict = "pass" if ok else "FAIL"
    print(
        f"collected {samples.tau} samples (n={samples.n}, m={samples.m}) "
        f"-> {out / DATA_FILE}; rank check: {verdict}"
    )
    if not ok:
        raise DataRankError(
            "stacked input/state data matrix is not full row rank; "
            "collect more samples or excite the plant with a richer input"
        )
    return 0


# -------------------------------------------------------------- synthesize


def _synthesize_from_file(cfg: RunConfig, out: Path):
    """Shared by cmd_synthesize and the sweep driver."""
    data_path = out / DATA_FILE
    if not data_path.exists():
        raise ConfigError(f"{data_path}: no data file; run 'detec collect' first")
    samples = load_samples(data_path)
    data = build_matrices(samples, x1_mode=cfg.experiment.x1_mode, dbar=cfg.dbar)
    if not check_rank(data.U0, data.X0):
        raise DataRankError(
            "stacked input/state data matrix is not full row rank; "
            "collect more samples or excite the plant with a richer input"
        )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result, cert = synthesize(data, cfg.design)
    _print_warnings(caught)
    gamma_reoptimized = cfg.design.reoptimize_gamma or any(
        "re-optimized" in str(w.message) for w in caught
    )
    meta = cfg.meta()
    meta["gamma_reoptimized"] = gamma_reoptimized
    meta["x1_mode"] = cfg.experiment.x1_mode
    save_result(out / SYNTH_FILE, result, cert, meta=meta)
    return result, cert, gamma_reoptimized


def cmd_synthesize(cfg: RunConfig, out: Path) -> int:
    result, _cert, _ = _synthesize_from_file(cfg, out)
    print(
        f"synthesis feasible: design margin {result.margins['design']:.3e}, "
        f"trigger margin {result.margins['trigger']:.3e} -> {out / SYNTH_FILE}"
    )
    print(
        f"  alpha={result.alpha:.6g} beta={result.beta:.6g} "
        f"delta={result.delta:.6g} gamma={result.gamma:.6g}"
    )
    return 0


# ---------------------------------------------------------------- simulate


def _final_residual(trace) -> float:
    """Mean state norm over the trailing window of the horizon."""
    norms = np.linalg.norm(trace.states, axis=1)
    cutoff = trace.times[-1] * (1.0 - TAIL_WINDOW)
    tail = norms[trace.times >= cutoff]
    return float(tail.mean()) if tail.size else float(norms[-1])


def _summary_dict(cfg: RunConfig, result, cert, report, trace) -> dict:
    return {
        "status": "ok",
        "meta": {
            **cfg.meta(),
            "tolerances": {"h_sim": cfg.h_sim, "tol_event": cfg.tol_event},
            "decisions": {
                "x1_mode": cfg.experiment.x1_mode,
                "trigger_objective": cfg.design.trigger_objective,
            },
        },
        "design": {
            "margins": result.margins,
            "K": result.K.tolist(),
            "alpha": result.alpha,
            "beta": result.beta,
            "delta": result.delta,
            "gamma": result.gamma,
        },
        "certificates": {
            "decay_rate": cert.decay_rate,
            "disturbance_gain": cert.disturbance_gain,
            "decay_rate_uniform": cert.decay_rate_uniform,
            "decay_rate_log": cert.decay_rate_log,
            "theta_max": _clean(cert.theta_max),
            "quant_offset_rate": cert.quant_offset_rate,
        },
        "scenario": {
            "dbar": cfg.scenario_disturbance.dbar,
            "disturbance": cfg.scenario_disturbance.kind,
            "x0": cfg.x0.tolist(),
            "T": cfg.T,
            "fbar": cfg.fbar,
            "mode": cfg.mode,
            "theta": cfg.theta,
        },
        "analysis": {
            "event_count": report.event_count,
            "miet_observed": _clean(report.miet_observed),
            "miet_bound": report.miet_bound,
            "e_sup": report.e_sup,
            "lyapunov_violation": _clean(report.lyapunov_violation),
            "iss_fit": [_clean(report.iss_fit[0]), _clean(report.iss_fit[1])],
            "final_norm_ratio": _clean(report.final_norm_ratio),
            "final_residual": _final_residual(trace),
        },
    }


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _simulate_from_file(cfg: RunConfig, out: Path):
    synth_path = out / SYNTH_FILE
    if not synth_path.exists():
        raise ConfigError(f"{synth_path}: no synthesis file; run 'detec synthesize' first")
    result, cert = load_result(synth_path)
    etm = EtmConfig(fbar=cfg.fbar, alpha=result.alpha, beta=result.beta,
                    mode=cfg.mode, theta=cfg.theta)
    if cfg.mode == "logarithmic" and cfg.theta > cert.theta_max:
        warnings.warn(
            f"theta {cfg.theta:.6g} exceeds the certified maximum "
            f"{cert.theta_max:.6g}; the convergence guarantee is void, proceeding",
            stacklevel=2,
        )
    sc = Scenario(
        sys=cfg.sys,
        synth=result,
        etm=etm,
        x0=cfg.x0,
        T=cfg.T,
        h_sim=cfg.h_sim,
        disturbance=cfg.scenario_disturbance,
        tol_event=cfg.tol_event,
    )
    try:
        trace = run_closed_loop(sc)
    except NumericalError as exc:
        # keep whatever was recorded before the failure on disk
        partial = getattr(exc, "trace", None)
        if partial is not None:
            save_trace(partial, out / TRACE_FILE, meta=cfg.meta())
            save_events(partial, out / EVENTS_FILE, meta=cfg.meta())
        _write_json(out / SUMMARY_FILE, {
            "status": _status_of(exc),
            "error": str(exc),
            "meta": cfg.meta(),
        })
        raise
    report = analyze_trace(trace, result, cert)
    save_trace(trace, out / TRACE_FILE, meta=cfg.meta())
    save_events(trace, out / EVENTS_FILE, meta=cfg.meta())
    summary = _summary_dict(cfg, result, cert, report, trace)
    _write_json(out / SUMMARY_FILE, summary)
    return report, summary


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    report, _ = _simulate_from_file(cfg, out)
    miet = "inf" if math.isinf(report.miet_observed) else f"{report.miet_observed:.4g}"
    print(
        f"simulated {cfg.T:g} s: {report.event_count} events, "
        f"observed MIET {miet} s (bound {report.miet_bound:.4g} s) "
        f"-> {out / SUMMARY_FILE}"
    )
    return 0


# ------------------------------------------------------------------- sweep

SWEEP_COLUMNS = [
    "index", "parameter", "value", "status",
    "design_margin", "trigger_margin", "alpha", "beta", "delta", "gamma",
    "event_count", "miet_observed", "miet_bound", "e_sup",
    "final_residual", "final_norm_ratio", "iss_c2", "lyapunov_violation",
    "error",
]


def _fmt_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _status_of(exc: Exception) -> str:
    if isinstance(exc, (DataRankError, InfeasibleError)):
        return "infeasible"
    if isinstance(exc, ZenoSuspectError):
        return "zeno_suspect"
    if isinstance(exc, NumericalError):
        return "numerical"
    return "validation"


def cmd_sweep(cfg: RunConfig, out: Path) -> int:
    """Run the full pipeline once per grid point and aggregate the results."""
    if cfg.sweep_parameter is None:
        raise ConfigError("config has no [sweep] section")
    rows = []
    for idx, value in enumerate(cfg.sweep_values):
        point_dir = out / SWEEP_DIR / f"point_{idx:03d}"
        row = {"index": idx, "parameter": cfg.sweep_parameter, "value": value}
        try:
            pcfg = with_parameter(cfg, cfg.sweep_parameter, value)
            cmd_collect(pcfg, point_dir)
            result, cert, _ = _synthesize_from_file(pcfg, point_dir)
            report, summary = _simulate_from_file(pcfg, point_dir)
        except (DetecError, ValueError) as exc:
            row["status"] = _status_of(exc)
            row["error"] = " ".join(str(exc).split())
            print(f"point {idx} ({cfg.sweep_parameter}={value:g}): {row['status']}: {exc}",
                  file=sys.stderr)
        else:
            row.update({
                "status": "ok",
                "design_margin": result.margins["design"],
                "trigger_margin": result.margins["trigger"],
                "alpha": result.alpha,
                "beta": result.beta,
                "delta": result.delta,
                "gamma": result.gamma,
                "event_count": report.event_count,
                "miet_observed": _clean(report.miet_observed),
                "miet_bound": report.miet_bound,
                "e_sup": report.e_sup,
                "final_residual": summary["analysis"]["final_residual"],
                "final_norm_ratio": _clean(report.final_norm_ratio),
                "iss_c2": _clean(report.iss_fit[1]),
                "lyapunov_violation": _clean(report.lyapunov_violation),
            })
        rows.append(row)
    out.mkdir(parents=True, exist_ok=True)
    meta = cfg.meta()
    with open(out / SWEEP_FILE, "w", encoding="utf-8") as fh:
        fh.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_fmt_cell(row.get(c)) for c in SWEEP_COLUMNS) + "\n")
    n_ok = sum(1 for r in rows if r["status"] == "ok")
    print(f"sweep complete: {n_ok}/{len(rows)} points succeeded -> {out / SWEEP_FILE}")
    return 0


# ------------------------------------------------------------------ report

REPORT_SCALARS = ["alpha", "beta", "delta", "gamma"]


def _load_summary(path: Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read summary: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "status" not in doc:
        raise ConfigError(f"{path}: not a summary file (missing 'status')")
    if doc["status"] == "ok":
        for section, keys in (
            ("design", ["K"] + REPORT_SCALARS),
            ("scenario", ["dbar", "mode", "theta"]),
            ("analysis", ["event_count", "miet_observed", "miet_bound"]),
        ):
            sub = doc.get(section)
            if not isinstance(sub, dict):
                raise ConfigError(f"{path}: missing section '{section}'")
            for key in keys:
                if key not in sub:
                    raise ConfigError(f"{path}: missing field '{section}.{key}'")
    return doc


def _fmt_num(v) -> str:
    if v is None:
        return "inf"
    return f"{v:.4g}"


def _report_rows(docs) -> tuple[list[str], list[list[str]]]:
    modes = {d["scenario"]["mode"] for d in docs if d["status"] == "ok"}
    with_mode = len(modes) > 1 or (modes and modes != {"plain"})
    header = ["dbar", "K", "alpha", "beta", "delta", "gamma",
              "events", "miet_obs", "miet_bound"]
    if with_mode:
        header += ["mode", "theta"]
    rows = []
    for doc in docs:
        if doc["status"] != "ok":
            row = ["-", doc["status"], "-", "-", "-", "-", "-", "-", "-"]
            if with_mode:
                row += ["-", "-"]
            rows.append(row)
            continue
        design = doc["design"]
        scen = doc["scenario"]
        ana = doc["analysis"]
        k_flat = np.asarray(design["K"], dtype=float).ravel()
        row = [
            _fmt_num(scen["dbar"]),
            "[" + " ".join(f"{v:.4g}" for v in k_flat) + "]",
            *[_fmt_num(design[k]) for k in REPORT_SCALARS],
            str(ana["event_count"]),
            _fmt_num(ana["miet_observed"]),
            _fmt_num(ana["miet_bound"]),
        ]
        if with_mode:
            row += [scen["mode"], _fmt_num(scen["theta"])]
        rows.append(row)
    return header, rows


def _render_table(header: list[str], rows: list[list[str]]) -> str:
    widths = [len(h) for h in header]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(header)).rstrip(),
        "  ".join("-" * widths[i] for i in range(len(header))),
    ]
    for row in rows:
        lines.append("  ".join(c.ljust(widths[i]) for i, c in enumerate(row)).rstrip())
    return "\n".join(lines)


def cmd_report(cfg: RunConfig, out: Path) -> int:
    if cfg.report_summaries:
        paths = [Path(p) for p in cfg.report_summaries]
    else:
        paths = sorted((out / SWEEP_DIR).glob(f"*/{SUMMARY_FILE}"))
        direct = out / SUMMARY_FILE
        if direct.exists():
            paths.append(direct)
    if not paths:
        raise ConfigError(
            f"no summary files found under {out}; list them in [report] summaries"
        )
    docs = [_load_summary(p) for p in paths]
    header, rows = _report_rows(docs)
    table = _render_table(header, rows)
    print(table)
    out.mkdir(parents=True, exist_ok=True)
    meta = cfg.meta()
    with open(out / REPORT_FILE, "w", encoding="utf-8") as fh:
        fh.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        fh.write(table + "\n")
    return 0


# -------------------------------------------------------------------- main

COMMANDS = {
    "collect": cmd_collect,
    "synthesize": cmd_synthesize,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="detec",
        description="data-driven event-triggered controller design and validation",
    )
    parser.add_argument("--version", action="version", version=f"detec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--out", default=None, help="override [output_dir]")
        p.add_argument("--seed", type=int, default=None,
                       help="rebase every random seed in the config")
    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, out_override=args.out, seed_override=args.seed)
        return COMMANDS[args.command](cfg, cfg.output_dir)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except DataRankError as exc:
        print(f"uninformative data: {exc}", file=sys.stderr)
        return 2
    except InfeasibleError as exc:
        label = {"design": "state-decay design stage", "trigger": "trigger design stage"}.get(exc.stage)
        prefix = f"infeasible ({label}): " if label else "infeasible: "
        print(prefix + str(exc), file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
