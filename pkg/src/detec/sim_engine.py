"""Closed-loop simulation of the event-triggered loop, plus trace analysis.

The plant state and the trigger scalar are co-integrated by one RK4 clock.
Each proposed step is accepted only if the trigger stays positive across
it; otherwise the crossing time is localized by bisection, the event fires
there exactly once (sample, quantize if configured, rebuild the held input,
reset the trigger), and integration resumes from the event instant toward
the next grid point. Traces record every grid point and every event
instant, events as post-reset rows.

Analysis reconstructs the measurement error from the recorded rows, checks
the decay inequality for V = x'Px + f/delta between events with centered
differences, fits the observed state-norm decay, and compares the observed
minimum inter-event time against the certified lower bound evaluated at
the trace's own error supremum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .etm import EtmConfig, phi_matrix, quantize_log, quantize_uniform
from .exceptions import NonFiniteStateError, ZenoSuspectError
from .synthesis import Certificates, SynthesisResult, miet_lower_bound
from .system_model import DisturbanceSpec, LinearSystem, disturbance_signal, rk4_step

ZENO_GUARD = 1e-12  # s; two events closer than this abort the run


@dataclass(frozen=True)
class Scenario:
    """Everything one closed-loop run needs."""

    sys: LinearSystem
    synth: SynthesisResult
    etm: EtmConfig
    x0: np.ndarray
    T: float
    h_sim: float = 1e-3
    disturbance: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    tol_event: float = 1e-9

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float).reshape(-1))
        if self.x0.shape[0] != self.sys.n:
            raise ValueError(
                f"x0 has length {self.x0.shape[0]}, plant expects {self.sys.n}"
            )
        if self.synth.K.shape != (self.sys.m, self.sys.n):
            raise ValueError(
                f"gain shape {self.synth.K.shape} does not match the plant "
                f"({self.sys.m} x {self.sys.n})"
            )
        if not self.T > 0.0:
            raise ValueError("horizon T must be positive")
        if not 0.0 < self.h_sim <= self.T:
            raise ValueError("need 0 < h_sim <= T")
        if not 0.0 < self.tol_event <= self.h_sim:
            raise ValueError("need 0 < tol_event <= h_sim")


@dataclass(frozen=True)
class SimulationTrace:
    """Recorded channels of one run.

    One row per integration grid point plus one per event instant (the
    event rows are post-reset: f back at its ceiling, the new input
    active). ``mode`` and ``theta`` echo the trigger configuration so the
    measurement error can be reconstructed later without the Scenario.
    """

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    f_values: np.ndarray
    V_values: np.ndarray
    d_norms: np.ndarray
    event_times: np.ndarray
    event_flags: np.ndarray
    mode: str = "plain"
    theta: float = 0.0

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.shape[0] == 0:
            raise ValueError("times must be a nonempty 1-D array")
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("times must be strictly increasing")
        ev = np.asarray(self.event_times, dtype=float)
        if ev.shape[0] == 0 or ev[0] != 0.0:
            raise ValueError("event_times must start at 0")
        if np.any(np.diff(ev) <= 0.0):
            raise ValueError("event_times must be strictly increasing")
        rows = t.shape[0]
        for name in ("states", "inputs", "f_values", "V_values", "d_norms", "event_flags"):
            if np.asarray(getattr(self, name)).shape[0] != rows:
                raise ValueError(f"{name} must have one entry per time row")


@dataclass(frozen=True)
class AnalysisReport:
    """Derived metrics of one trace."""

    event_count: int
    miet_observed: float
    miet_bound: float
    e_sup: float
    lyapunov_violation: float
    iss_fit: tuple[float, float]
    final_norm_ratio: float

    def __post_init__(self):
        if self.event_count < 1:
            raise ValueError("a valid trace has at least the t=0 event")
        if self.miet_observed < 0.0:
            raise ValueError("miet_observed cannot be negative")


def _effective_state(x: np.ndarray, mode: str, theta: float) -> np.ndarray:
    if mode == "plain":
        return x
    if mode == "uniform":
        return quantize_uniform(x, theta)
    return quantize_log(x, theta)


def run_closed_loop(sc: Scenario) -> SimulationTrace:
    """Simulate the event-triggered loop over [0, T].

    The t=0 event always fires: the initial state is sampled (quantized in
    the quantized modes), the input is built from it and the trigger
    starts at its reset ceiling. Raises :class:`NonFiniteStateError` if
    the state leaves the floating-point range and :class:`ZenoSuspectError`
    on an event storm; both carry the partial trace.
    """
    sys = sc.sys
    K = sc.synth.K
    P = sc.synth.P
    delta = sc.synth.delta
    cfg = sc.etm
    mode, theta = cfg.mode, cfg.theta
    phi = phi_matrix(cfg.alpha, cfg.beta, sys.n, mode, theta)
    d_of = disturbance_signal(sc.disturbance, sys.n)
    n = sys.n

    def vector_field(t, y):
        x = y[:n]
        fval = y[n]
        xdot = sys.A @ x + sys.B @ u + d_of(t)
        e = x_held - _effective_state(x, mode, theta)
        z = np.concatenate([_effective_state(x, mode, theta), e])
        quad = float(z @ phi @ z)
        fdot = min(-quad, 0.0) - fval
        out = np.empty(n + 1)
        out[:n] = xdot
        out[n] = fdot
        return out

    times = []
    states = []
    inputs = []
    f_values = []
    V_values = []
    d_norms = []
    flags = []
    event_times = []

    def record(t, x, fval, is_event):
        times.append(t)
        states.append(x.copy())
        inputs.append(u.copy())
        f_values.append(fval)
        V_values.append(float(x @ P @ x) + fval / delta)
        d_norms.append(float(np.linalg.norm(d_of(t))))
        flags.append(1 if is_event else 0)

    def partial_trace():
        return _assemble(times, states, inputs, f_values, V_values, d_norms,
                         flags, event_times, mode, theta)

    # The t=0 event: sample, hold, reset.
    x = sc.x0.copy()
    x_held = _effective_state(x, mode, theta)
    u = K @ x_held
    f = cfg.fbar
    t = 0.0
    event_times.append(0.0)
    record(0.0, x, f, True)

    grid_index = 1
    t_next = min(sc.h_sim, sc.T)
    while t < sc.T - 1e-12 * max(1.0, sc.T):
        h = t_next - t
        y = np.concatenate([x, [f]])
        y_prop = rk4_step(vector_field, t, y, h)
        if not np.all(np.isfinite(y_prop)):
            raise NonFiniteStateError(
                f"state left the floating-point range near t = {t:.6g} s",
                trace=partial_trace(),
            )
        if y_prop[n] > 0.0:
            # No crossing in this step: land on the grid point.
            t = t_next
            x = y_prop[:n]
            f = float(y_prop[n])
            record(t, x, f, False)
            grid_index += 1
            t_next = min(grid_index * sc.h_sim, sc.T)
            continue
        # The trigger crossed zero somewhere in (t, t + h]. Bisect for the
        # left-most crossing: the invariant is f > 0 at t + lo and f <= 0
        # at t + hi.
        lo, hi = 0.0, h
        y_hi = y_prop
        while hi - lo > sc.tol_event:
            mid = 0.5 * (lo + hi)
            y_mid = rk4_step(vector_field, t, y, mid)
            if y_mid[n] > 0.0:
                lo = mid
            else:
                hi = mid
                y_hi = y_mid
        t_event = t + hi
        if t_event - event_times[-1] < ZENO_GUARD:
            raise ZenoSuspectError(
                f"events {event_times[-1]:.17g} and {t_event:.17g} are closer "
                f"than {ZENO_GUARD:g} s; trigger parameters look degenerate",
                trace=partial_trace(),
            )
        x = y_hi[:n]
        x_held = _effective_state(x, mode, theta)
        u = K @ x_held
        f = cfg.fbar
        t = t_event
        event_times.append(t_event)
        record(t_event, x, f, True)
        # t_next is unchanged: resume toward the same grid point, unless the
        # event landed on top of it.
        if t_next - t <= 1e-15 * max(1.0, sc.T):
            grid_index += 1
            t_next = min(grid_index * sc.h_sim, sc.T)

    return partial_trace()


def _assemble(times, states, inputs, f_values, V_values, d_norms, flags,
              event_times, mode, theta):
    return SimulationTrace(
        times=np.asarray(times, dtype=float),
        states=np.asarray(states, dtype=float),
        inputs=np.asarray(inputs, dtype=float),
        f_values=np.asarray(f_values, dtype=float),
        V_values=np.asarray(V_values, dtype=float),
        d_norms=np.asarray(d_norms, dtype=float),
        event_times=np.asarray(event_times, dtype=float),
        event_flags=np.asarray(flags, dtype=int),
        mode=mode,
        theta=theta,
    )


def fit_exponential(times, norms) -> tuple[float, float]:
    """Least-squares fit ln(norm) = ln(c1) - c2 * t, returned as (c1, c2).

    All-zero (or otherwise unusable) data maps to the sentinel (1, inf):
    a dead signal decays faster than any exponential.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(norms, dtype=float)
    if t.shape != v.shape or t.ndim != 1:
        raise ValueError("times and norms must be 1-D arrays of equal length")
    usable = v > 0.0
    if np.count_nonzero(usable) < 2:
        return (1.0, math.inf)
    t, v = t[usable], v[usable]
    slope, intercept = np.polyfit(t, np.log(v), 1)
    return (float(np.exp(intercept)), float(-slope))


SETTLE_FRACTION = 0.02  # norm threshold (relative to ||x0||) ending the fit window


def analyze_trace(
    trace: SimulationTrace, synth: SynthesisResult, cert: Certificates
) -> AnalysisReport:
    """Boil a trace down to the report metrics.

    The decay inequality is checked between events only: V jumps upward by
    fbar/delta at each reset, so grid points within one step of an event
    are excluded and V' is estimated by centered differences on what
    remains. The reported violation is the worst value of
    V' + rate * V - gain * ||d||^2 (minus the quantization offset
    allowance in uniform mode); a value <= 0 means the certified
    inequality held everywhere it applies.
    """
    L = trace.times.shape[0]
    if L < 3:
        raise ValueError("trace too short to analyze (need at least 3 rows)")

    event_count = int(trace.event_times.shape[0])
    gaps = np.diff(trace.event_times)
    miet_observed = float(gaps.min()) if gaps.size else math.inf

    # Measurement error: the held sample is the effective state at the most
    # recent event row.
    event_rows = np.flatnonzero(trace.event_flags == 1)
    eff = np.array(
        [_effective_state(x, trace.mode, trace.theta) for x in trace.states]
    )
    held_of_row = np.searchsorted(trace.times[event_rows], trace.times, side="right") - 1
    errors = eff[event_rows[held_of_row]] - eff
    e_sup = float(np.linalg.norm(errors, axis=1).max())

    fbar = float(trace.f_values[0])
    miet_bound = miet_lower_bound(fbar, synth.beta, e_sup)

    if trace.mode == "uniform":
        rate = cert.decay_rate_uniform
        offset = cert.quantization_offset(trace.theta)
    elif trace.mode == "logarithmic":
        rate = cert.decay_rate_log
        offset = 0.0
    else:
        rate = cert.decay_rate
        offset = 0.0
    gain = cert.disturbance_gain

    near_event = np.zeros(L, dtype=bool)
    for r in event_rows:
        near_event[max(r - 1, 0) : min(r + 2, L)] = True
    violation = -math.inf
    for i in range(1, L - 1):
        if near_event[i - 1] or near_event[i] or near_event[i + 1]:
            continue
        dt = trace.times[i + 1] - trace.times[i - 1]
        vdot = (trace.V_values[i + 1] - trace.V_values[i - 1]) / dt
        resid = vdot + rate * trace.V_values[i] - gain * trace.d_norms[i] ** 2 - offset
        if resid > violation:
            violation = resid

    norms = np.linalg.norm(trace.states, axis=1)
    if norms[0] > 0.0:
        settled = np.flatnonzero(norms <= SETTLE_FRACTION * norms[0])
        cut = int(settled[0]) if settled.size else L
        window = slice(0, max(cut, 2))
        iss_fit = fit_exponential(trace.times[window], norms[window])
        final_ratio = float(norms[-1] / norms[0])
    else:
        iss_fit = fit_exponential(trace.times, norms)
        final_ratio = 0.0 if norms[-1] == 0.0 else math.inf

    return AnalysisReport(
        event_count=event_count,
        miet_observed=miet_observed,
        miet_bound=miet_bound,
        e_sup=e_sup,
        lyapunov_violation=float(violation),
        iss_fit=iss_fit,
        final_norm_ratio=final_ratio,
    )


def save_trace(trace: SimulationTrace, path, meta: Optional[dict] = None) -> None:
    """Write the trace as CSV: t, x_1..x_n, u_1..u_m, f, V, d_norm, event.

    ``meta`` key/value pairs go into a leading ``#`` comment line, so the
    header stays the first non-comment row.
    """
    n = trace.states.shape[1]
    m = trace.inputs.shape[1]
    header = (
        ["t"]
        + [f"x_{i + 1}" for i in range(n)]
        + [f"u_{j + 1}" for j in range(m)]
        + ["f", "V", "d_norm", "event"]
    )
    with open(path, "w", encoding="utf-8") as fh:
        if meta:
            fh.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        fh.write(",".join(header) + "\n")
        for i in range(trace.times.shape[0]):
            cells = [f"{trace.times[i]:.17g}"]
            cells += [f"{v:.17g}" for v in trace.states[i]]
            cells += [f"{v:.17g}" for v in trace.inputs[i]]
            cells += [
                f"{trace.f_values[i]:.17g}",
                f"{trace.V_values[i]:.17g}",
                f"{trace.d_norms[i]:.17g}",
                str(int(trace.event_flags[i])),
            ]
            fh.write(",".join(cells) + "\n")


def save_events(trace: SimulationTrace, path, meta: Optional[dict] = None) -> None:
    """Write event instants one per line, full precision."""
    with open(path, "w", encoding="utf-8") as fh:
        if meta:
            fh.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        for t in trace.event_times:
            fh.write(f"{t:.17g}\n")
