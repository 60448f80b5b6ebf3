"""Dynamic event-triggering mechanism and state quantizers.

The trigger keeps an auxiliary scalar f alongside the plant state. Between
events f obeys

    f' = min(-z^T Phi z, 0) - f,      z = [x_eff; e],

where e is the error between the last transmitted sample and the current
state, and x_eff is the raw state in plain mode or its quantized image in
the quantized modes. An event fires when f reaches zero; the sample is
retransmitted, e collapses to zero and f restarts from the reset value.
Phi is diagonal, so the min term compares a state-dependent budget
against beta * ||e||^2; the budget's weight shrinks under quantization to
absorb the quantizer error (halved for uniform, scaled by e^-theta for
logarithmic).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ETM_MODES = ("plain", "uniform", "logarithmic")


@dataclass(frozen=True)
class EtmConfig:
    """Trigger parameters: reset value, weights, mode and quantizer step.

    ``theta`` is the quantizer parameter and is ignored in plain mode. In
    logarithmic mode it should stay below the ``theta_max`` certificate of
    the synthesis result; that check lives with the caller because the
    certificate is not known here.
    """

    fbar: float
    alpha: float
    beta: float
    mode: str = "plain"
    theta: float = 0.0

    def __post_init__(self):
        if self.mode not in ETM_MODES:
            raise ValueError(f"mode must be one of {ETM_MODES}, got {self.mode!r}")
        if not self.fbar > 0.0:
            raise ValueError("fbar must be positive")
        if not self.alpha > 0.0 or not self.beta > 0.0:
            raise ValueError("alpha and beta must be positive")
        if self.mode != "plain" and not self.theta > 0.0:
            raise ValueError("quantized modes need a positive theta")


@dataclass(frozen=True)
class EtmState:
    """Trigger bookkeeping between events.

    ``f`` stays in [0, fbar] up to integration tolerance; ``x_held`` is the
    last transmitted sample (already quantized in the quantized modes).
    """

    f: float
    x_held: np.ndarray
    t_last: float


def phi_matrix(
    alpha: float, beta: float, n: int, mode: str = "plain", theta: float = 0.0
) -> np.ndarray:
    """Quadratic-form weight for the trigger, blockdiag(-a*I_n, beta*I_n).

    The state weight a is alpha in plain mode, alpha/2 in uniform mode and
    e^-theta * alpha in logarithmic mode.
    """
    if not alpha > 0.0 or not beta > 0.0:
        raise ValueError("alpha and beta must be positive")
    if mode == "plain":
        a = alpha
    elif mode == "uniform":
        a = 0.5 * alpha
    elif mode == "logarithmic":
        a = float(np.exp(-theta)) * alpha
    else:
        raise ValueError(f"mode must be one of {ETM_MODES}, got {mode!r}")
    top = -a * np.eye(n)
    bot = beta * np.eye(n)
    out = np.zeros((2 * n, 2 * n))
    out[:n, :n] = top
    out[n:, n:] = bot
    return out


def f_derivative(f: float, x_eff: np.ndarray, e: np.ndarray, phi: np.ndarray) -> float:
    """Right-hand side of the trigger ODE, min(-z^T phi z, 0) - f."""
    z = np.concatenate([np.atleast_1d(x_eff), np.atleast_1d(e)])
    quad = float(z @ phi @ z)
    return min(-quad, 0.0) - f


def should_trigger(state: EtmState) -> bool:
    """True once f has reached (or overshot) zero."""
    return state.f <= 0.0


def reset(config: EtmConfig, x_new_held: np.ndarray, t_event: float) -> EtmState:
    """Post-event state: f back at the reset value, the new sample held."""
    return EtmState(f=config.fbar, x_held=np.array(x_new_held, dtype=float), t_last=t_event)


def quantize_uniform(x, theta: float):
    """Componentwise theta * round(x / theta), exact halves rounding up.

    floor(v + 1/2) implements round-half-toward-+inf for either sign, so
    quantize_uniform(0.5, 1.0) is 1.0 and quantize_uniform(-0.5, 1.0) is 0.
    The error per component is at most theta / 2.
    """
    if not theta > 0.0:
        raise ValueError("theta must be positive")
    arr = np.asarray(x, dtype=float)
    out = theta * np.floor(arr / theta + 0.5)
    if out.ndim == 0:
        return float(out)
    return out


def quantize_log(x, theta: float):
    """Componentwise sign(x) * exp(quantize_uniform(ln|x|, theta)).

    Zero maps to zero (the limit point; keeps the relative error bound and
    the odd symmetry). The relative error per component is at most
    e^(theta/2) - 1.
    """
    if not theta > 0.0:
        raise ValueError("theta must be positive")
    arr = np.asarray(x, dtype=float)
    out = np.zeros_like(arr)
    nz = arr != 0.0
    mag = np.abs(arr[nz])
    out[nz] = np.sign(arr[nz]) * np.exp(theta * np.floor(np.log(mag) / theta + 0.5))
    if out.ndim == 0:
        return float(out)
    return out
