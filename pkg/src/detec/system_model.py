"""Continuous-time plant model, disturbance generators, and integration helpers.

The toolkit treats the plant ``xdot = A x + B u + d`` as ground truth that is
only ever *sampled*: the synthesis pipeline never reads A or B, it sees data.
This module provides

* :class:`LinearSystem` -- the simulated truth model,
* :func:`derivative` -- its vector field,
* :func:`rk4_step` -- one classic Runge-Kutta step for an arbitrary field,
* :func:`spectral_abscissa` -- max real part of the eigenvalues,
* :class:`DisturbanceSpec` / :func:`disturbance_signal` -- seeded, bounded,
  deterministic disturbance signals,
* :func:`aircraft_model` -- the bundled longitudinal-dynamics demo plant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import NumericalError

__all__ = [
    "LinearSystem",
    "DisturbanceSpec",
    "Signal",
    "derivative",
    "rk4_step",
    "spectral_abscissa",
    "disturbance_signal",
    "aircraft_model",
]

# A disturbance signal maps time (s) to a vector in R^n.
Signal = Callable[[float], np.ndarray]

DISTURBANCE_KINDS = ("zero", "constant", "sinusoid", "piecewise_random")


@dataclass(frozen=True)
class LinearSystem:
    """Disturbed linear time-invariant plant ``xdot = A x + B u + d``.

    Parameters
    ----------
    A : (n, n) array_like
        State matrix.
    B : (n, m) array_like
        Input matrix.
    """

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ValueError(
                f"B has {B.shape[0]} rows but the state dimension is {A.shape[0]}"
            )
        if not (np.isfinite(A).all() and np.isfinite(B).all()):
            raise ValueError("A and B must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        """State dimension."""
        return self.A.shape[0]

    @property
    def m(self) -> int:
        """Input dimension."""
        return self.B.shape[1]


def derivative(sys: LinearSystem, x, u, d) -> np.ndarray:
    """Evaluate the plant vector field ``A x + B u + d``.

    Parameters
    ----------
    sys : LinearSystem
    x : (n,) array_like
    u : (m,) array_like
    d : (n,) array_like

    Returns
    -------
    (n,) ndarray
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    d = np.asarray(d, dtype=float).reshape(-1)
    if x.shape[0] != sys.n:
        raise ValueError(f"x has length {x.shape[0]}, expected {sys.n}")
    if u.shape[0] != sys.m:
        raise ValueError(f"u has length {u.shape[0]}, expected {sys.m}")
    if d.shape[0] != sys.n:
        raise ValueError(f"d has length {d.shape[0]}, expected {sys.n}")
    return sys.A @ x + sys.B @ u + d


def rk4_step(f: Callable[[float, np.ndarray], np.ndarray], t: float, y, h: float) -> np.ndarray:
    """Advance ``ydot = f(t, y)`` by one classic fourth-order Runge-Kutta step.

    Parameters
    ----------
    f : callable
        Vector field ``f(t, y) -> ydot``.
    t : float
        Current time.
    y : (k,) array_like
        Current value.
    h : float
        Step size, must be positive.

    Returns
    -------
    (k,) ndarray
        Value at ``t + h``.
    """
    if h <= 0.0:
        raise ValueError(f"step size must be positive, got {h}")
    y = np.asarray(y, dtype=float)
    k1 = np.asarray(f(t, y))
    k2 = np.asarray(f(t + 0.5 * h, y + (0.5 * h) * k1))
    k3 = np.asarray(f(t + 0.5 * h, y + (0.5 * h) * k2))
    k4 = np.asarray(f(t + h, y + h * k3))
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def spectral_abscissa(A) -> float:
    """Largest real part over the eigenvalues of a square matrix.

    Negative means Hurwitz. Raises :class:`NumericalError` if the
    eigenvalue iteration fails to converge.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got shape {A.shape}")
    try:
        eig = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue computation failed: {exc}") from exc
    return float(np.max(eig.real))


@dataclass(frozen=True)
class DisturbanceSpec:
    """Description of a bounded deterministic disturbance signal.

    ``kind`` is one of ``"zero"``, ``"constant"``, ``"sinusoid"``,
    ``"piecewise_random"``. All kinds satisfy ``|d(t)| <= dbar`` for all t.
    Generation is a pure function of (kind, dbar, seed, t): two signals
    built from equal specs agree everywhere.
    """

    kind: str = "zero"
    dbar: float = 0.0
    seed: int = 0
    hold: float = 0.01  # piecewise_random: constant on [i*hold, (i+1)*hold)

    def __post_init__(self):
        if self.kind not in DISTURBANCE_KINDS:
            raise ValueError(
                f"unknown disturbance kind {self.kind!r}, expected one of {DISTURBANCE_KINDS}"
            )
        if self.dbar < 0.0:
            raise ValueError("dbar must be nonnegative")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        if self.hold <= 0.0:
            raise ValueError("hold must be positive")


def _unit_vector(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.standard_normal(n)
    norm = np.linalg.norm(v)
    if norm < 1e-12:  # essentially impossible, but keep the bound airtight
        v = np.zeros(n)
        v[0] = 1.0
        return v
    return v / norm


def _ball_point(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    # Uniform draw from the closed radius-ball in R^n.
    direction = _unit_vector(rng, n)
    r = radius * rng.uniform() ** (1.0 / n)
    return r * direction


def disturbance_signal(spec: DisturbanceSpec, n: int) -> Signal:
    """Build the ``t -> d(t)`` evaluator for a disturbance description.

    The returned callable is valid for any ``t >= 0`` and is O(1) per call,
    so integrators may evaluate it at arbitrary stage points.
    """
    if n < 1:
        raise ValueError("state dimension must be at least 1")

    if spec.kind == "zero" or spec.dbar == 0.0:
        zero = np.zeros(n)
        return lambda t: zero

    if spec.kind == "constant":
        rng = np.random.default_rng([spec.seed])
        value = spec.dbar * _unit_vector(rng, n)
        return lambda t: value

    if spec.kind == "sinusoid":
        rng = np.random.default_rng([spec.seed])
        direction = _unit_vector(rng, n)
        omega = rng.uniform(0.5, 5.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        dbar = spec.dbar
        return lambda t: (dbar * np.sin(omega * t + phase)) * direction

    # piecewise_random: independent uniform ball draw per hold interval,
    # addressed statelessly by the interval index so lookups never depend
    # on evaluation order.
    hold = spec.hold
    seed = spec.seed
    dbar = spec.dbar
    cache: dict[int, np.ndarray] = {}

    def signal(t: float) -> np.ndarray:
        i = int(np.floor(t / hold))
        if i < 0:
            i = 0
        value = cache.get(i)
        if value is None:
            rng = np.random.default_rng([seed, i])
            value = _ball_point(rng, n, dbar)
            cache[i] = value
        return value

    return signal


def aircraft_model() -> LinearSystem:
    """Longitudinal aircraft demo plant (angle of attack, pitch rate, elevator).

    A lightly damped short-period pair plus a first-order actuator; the
    single input drives the actuator state. Used by the bundled configs,
    demos, and acceptance tests.
    """
    A = np.array(
        [
            [-0.277, 1.0, -0.0002],
            [-17.1, -0.178, -12.2],
            [0.0, 0.0, -6.67],
        ]
    )
    B = np.array([[0.0], [0.0], [6.67]])
    return LinearSystem(A, B)
