"""Open-loop experiments and the data matrices consumed by synthesis.

The design pipeline never sees the plant matrices. It works with a finite
set of samples collected over one input/state experiment:

* ``X0``  -- states at the sampling instants,
* ``X1``  -- state derivatives at the same instants (measured, or estimated
  by forward differences in ``euler`` mode),
* ``U0``  -- the piecewise-constant inputs applied there,
* ``D0``  -- the disturbance actually realized (only known in simulation),
* ``Delta`` -- a matrix overbound on ``D0 D0^T`` built from the disturbance
  norm bound alone.

Samples round-trip through a plain CSV format so externally recorded data
can be used in place of the built-in simulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import ConfigError, DataRankError
from .system_model import DisturbanceSpec, LinearSystem, disturbance_signal, rk4_step

__all__ = [
    "ExperimentConfig",
    "SampleSet",
    "DataMatrices",
    "run_experiment",
    "build_matrices",
    "bound_delta",
    "check_rank",
    "save_samples",
    "load_samples",
]

RANK_RTOL = 1e-8  # singular values below RANK_RTOL * sigma_max count as zero

X1_MODES = ("exact", "euler")


@dataclass(frozen=True)
class ExperimentConfig:
    """Protocol of one open-loop data-collection experiment.

    The plant starts from a uniformly drawn initial state, a fresh uniform
    input is applied and held over every sampling interval, and the state
    (plus its derivative in ``exact`` mode) is recorded at each sampling
    instant. ``samples`` must be at least n + m for the data to have any
    chance of passing the rank check.
    """

    sampling_period: float = 0.1
    samples: int = 10
    input_range: tuple[float, float] = (-1.0, 1.0)
    x0_range: tuple[float, float] = (-10.0, 10.0)
    x1_mode: str = "exact"
    disturbance: DisturbanceSpec = DisturbanceSpec()
    seed: int = 0
    integration_step: float = 1e-3

    def __post_init__(self):
        if self.sampling_period <= 0.0:
            raise ValueError("sampling_period must be positive")
        if self.samples < 2:
            raise ValueError("samples must be at least 2")
        if self.input_range[0] > self.input_range[1]:
            raise ValueError("input_range must be (low, high) with low <= high")
        if self.x0_range[0] > self.x0_range[1]:
            raise ValueError("x0_range must be (low, high) with low <= high")
        if self.x1_mode not in X1_MODES:
            raise ValueError(f"x1_mode must be one of {X1_MODES}, got {self.x1_mode!r}")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        if self.integration_step <= 0.0:
            raise ValueError("integration_step must be positive")


@dataclass(frozen=True)
class SampleSet:
    """Raw experiment record: columns are sampling instants.

    ``xdots`` is None when derivatives were not measured (forces euler
    mode downstream); ``disturbances`` is None for data loaded from disk,
    where the realized disturbance is unknown.
    """

    times: np.ndarray  # (tau,)
    states: np.ndarray  # (n, tau)
    inputs: np.ndarray  # (m, tau)
    xdots: Optional[np.ndarray] = None  # (n, tau)
    disturbances: Optional[np.ndarray] = None  # (n, tau)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        tau = times.shape[0]
        if states.shape[1] != tau or inputs.shape[1] != tau:
            raise ValueError("states and inputs must have one column per sampling instant")
        if np.any(np.diff(times) <= 0.0):
            raise ValueError("sampling times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "inputs", inputs)
        for name in ("xdots", "disturbances"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.atleast_2d(np.asarray(arr, dtype=float))
                if arr.shape != states.shape:
                    raise ValueError(f"{name} must match the states array shape")
                object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.states.shape[0]

    @property
    def m(self) -> int:
        return self.inputs.shape[0]

    @property
    def tau(self) -> int:
        return self.times.shape[0]


@dataclass(frozen=True)
class DataMatrices:
    """Data matrices in the shape the synthesis stage consumes.

    ``X1`` holds measured derivatives in ``exact`` mode and forward
    differences in ``euler`` mode (one column fewer than collected).
    ``D0`` is only available on simulator data and is never required by
    synthesis; it feeds the a-posteriori closed-loop identity checks.
    """

    X0: np.ndarray  # (n, tau)
    X1: np.ndarray  # (n, tau)
    U0: np.ndarray  # (m, tau)
    Delta: np.ndarray  # (n, n)
    times: np.ndarray  # (tau,)
    x1_mode: str = "exact"
    D0: Optional[np.ndarray] = None  # (n, tau)

    def __post_init__(self):
        tau = self.X0.shape[1]
        if self.X1.shape != self.X0.shape:
            raise ValueError("X0 and X1 must have equal shapes")
        if self.U0.shape[1] != tau or self.times.shape[0] != tau:
            raise ValueError("U0/times must have one column/entry per sample")
        n = self.X0.shape[0]
        if self.Delta.shape != (n, n):
            raise ValueError("Delta must be n x n")
        if self.D0 is not None and self.D0.shape != self.X0.shape:
            raise ValueError("D0 must match X0's shape")

    @property
    def n(self) -> int:
        return self.X0.shape[0]

    @property
    def m(self) -> int:
        return self.U0.shape[0]

    @property
    def tau(self) -> int:
        return self.X0.shape[1]


def run_experiment(sys: LinearSystem, cfg: ExperimentConfig) -> SampleSet:
    """Simulate one open-loop experiment and record the samples.

    Deterministic given the config: the initial state and held inputs come
    from one seeded generator, the disturbance from its own spec. Returns
    measured derivatives (``exact`` protocol); downstream consumers may
    still discard them and use euler estimates.
    """
    tau = cfg.samples
    if tau < sys.n + sys.m:
        raise DataRankError(
            f"need at least n + m = {sys.n + sys.m} samples for informative data, got {tau}"
        )
    rng = np.random.default_rng([cfg.seed])
    x0 = rng.uniform(cfg.x0_range[0], cfg.x0_range[1], size=sys.n)
    inputs = rng.uniform(cfg.input_range[0], cfg.input_range[1], size=(sys.m, tau))
    d_sig = disturbance_signal(cfg.disturbance, sys.n)

    period = cfg.sampling_period
    n_sub = max(1, math.ceil(period / cfg.integration_step))
    h = period / n_sub

    times = np.arange(tau) * period
    states = np.empty((sys.n, tau))
    xdots = np.empty((sys.n, tau))
    dists = np.empty((sys.n, tau))

    x = x0
    for i in range(tau):
        t_i = times[i]
        u_i = inputs[:, i]
        d_i = d_sig(t_i)
        states[:, i] = x
        dists[:, i] = d_i
        xdots[:, i] = sys.A @ x + sys.B @ u_i + d_i
        field = lambda t, y: sys.A @ y + sys.B @ u_i + d_sig(t)  # noqa: E731
        for k in range(n_sub):
            x = rk4_step(field, t_i + k * h, x, h)

    return SampleSet(times=times, states=states, inputs=inputs, xdots=xdots, disturbances=dists)


def bound_delta(dbar: float, tau: int, n: int) -> np.ndarray:
    """Disturbance-energy overbound ``sqrt(tau) * dbar * I``.

    With every disturbance sample bounded by ``dbar`` in norm, the realized
    ``D0`` satisfies ``D0 D0^T <= tau * dbar^2 * I = Delta Delta^T``.
    """
    if dbar < 0.0:
        raise ValueError("dbar must be nonnegative")
    if tau < 1 or n < 1:
        raise ValueError("tau and n must be positive")
    return math.sqrt(tau) * dbar * np.eye(n)


def check_rank(U0, X0) -> bool:
    """True when the stacked matrix [U0; X0] has full row rank.

    Uses an SVD with relative tolerance 1e-8 on the singular values. Fewer
    columns than rows can never pass.
    """
    U0 = np.atleast_2d(np.asarray(U0, dtype=float))
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    if U0.shape[1] != X0.shape[1]:
        raise ValueError("U0 and X0 must have the same number of columns")
    stacked = np.vstack([U0, X0])
    rows, cols = stacked.shape
    if cols < rows:
        return False
    svals = np.linalg.svd(stacked, compute_uv=False)
    if svals[0] == 0.0:
        return False
    return bool(svals[-1] / svals[0] > RANK_RTOL)


def build_matrices(samples: SampleSet, x1_mode: str = "exact", dbar: float = 0.0) -> DataMatrices:
    """Assemble the synthesis data matrices from raw samples.

    ``exact`` mode requires measured derivatives. ``euler`` mode estimates
    them by forward differences over the recorded (possibly non-uniform)
    sampling times and drops the final sample, which has no successor.
    """
    if x1_mode not in X1_MODES:
        raise ValueError(f"x1_mode must be one of {X1_MODES}, got {x1_mode!r}")
    if x1_mode == "exact":
        if samples.xdots is None:
            raise ConfigError("exact mode needs measured derivatives; use euler mode instead")
        X0 = samples.states.copy()
        X1 = samples.xdots.copy()
        U0 = samples.inputs.copy()
        times = samples.times.copy()
        D0 = None if samples.disturbances is None else samples.disturbances.copy()
    else:
        if samples.tau < 2:
            raise ValueError("euler mode needs at least two samples")
        dt = np.diff(samples.times)
        X0 = samples.states[:, :-1].copy()
        X1 = (samples.states[:, 1:] - samples.states[:, :-1]) / dt
        U0 = samples.inputs[:, :-1].copy()
        times = samples.times[:-1].copy()
        # Forward differences absorb the disturbance; no usable D0 here.
        D0 = None
    delta = bound_delta(dbar, X0.shape[1], X0.shape[0])
    return DataMatrices(X0=X0, X1=X1, U0=U0, Delta=delta, times=times, x1_mode=x1_mode, D0=D0)


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def save_samples(path, samples: SampleSet, meta: Optional[dict] = None) -> None:
    """Write samples as CSV: ``i, t, x_1..x_n, xdot_1..xdot_n, u_1..u_m``.

    All values carry 17 significant digits, enough for a bit-exact
    round-trip. ``meta`` key/value pairs go into a leading ``#`` comment.
    """
    n, m = samples.n, samples.m
    cols = ["i", "t"]
    cols += [f"x_{j + 1}" for j in range(n)]
    if samples.xdots is not None:
        cols += [f"xdot_{j + 1}" for j in range(n)]
    cols += [f"u_{j + 1}" for j in range(m)]
    lines = []
    if meta:
        pairs = " ".join(f"{k}={v}" for k, v in meta.items())
        lines.append(f"# {pairs}")
    lines.append(",".join(cols))
    for i in range(samples.tau):
        row = [str(i), _fmt(samples.times[i])]
        row += [_fmt(v) for v in samples.states[:, i]]
        if samples.xdots is not None:
            row += [_fmt(v) for v in samples.xdots[:, i]]
        row += [_fmt(v) for v in samples.inputs[:, i]]
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_samples(path) -> SampleSet:
    """Read a sample CSV written by :func:`save_samples` (or by hand).

    The ``xdot_*`` columns are optional; when absent the loaded set forces
    euler mode downstream. Malformed headers or rows raise
    :class:`~detec.exceptions.ConfigError`.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw_lines = [ln.strip() for ln in fh]
    lines = [ln for ln in raw_lines if ln and not ln.startswith("#")]
    if not lines:
        raise ConfigError(f"{path}: empty sample file")
    header = [c.strip() for c in lines[0].split(",")]
    if header[:2] != ["i", "t"]:
        raise ConfigError(f"{path}: header must start with 'i, t', got {header[:2]}")
    names = header[2:]
    n = sum(1 for c in names if c.startswith("x_"))
    ndot = sum(1 for c in names if c.startswith("xdot_"))
    m = sum(1 for c in names if c.startswith("u_"))
    expected = (
        [f"x_{j + 1}" for j in range(n)]
        + [f"xdot_{j + 1}" for j in range(ndot)]
        + [f"u_{j + 1}" for j in range(m)]
    )
    if n < 1 or m < 1 or names != expected or ndot not in (0, n):
        raise ConfigError(f"{path}: malformed column set {names}")
    rows = []
    for k, ln in enumerate(lines[1:], start=2):
        parts = [p.strip() for p in ln.split(",")]
        if len(parts) != len(header):
            raise ConfigError(f"{path}: line {k} has {len(parts)} fields, expected {len(header)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise ConfigError(f"{path}: line {k}: {exc}") from exc
    data = np.asarray(rows, dtype=float)
    idx = data[:, 0]
    if not np.array_equal(idx, np.arange(len(rows))):
        raise ConfigError(f"{path}: index column must run 0..{len(rows) - 1}")
    times = data[:, 1]
    states = data[:, 2 : 2 + n].T
    xdots = data[:, 2 + n : 2 + n + ndot].T if ndot else None
    inputs = data[:, 2 + n + ndot :].T
    try:
        return SampleSet(times=times, states=states, inputs=inputs, xdots=xdots)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
