"""Controller and trigger-parameter synthesis from data matrices.

Stage 1 solves, directly over the experiment data, a matrix-inequality
pair in a tall matrix variable Y and a scalar multiplier gamma whose
feasibility certifies that the state feedback

    K = U0 * Y * (X0 * Y)^-1

stabilizes every plant consistent with the data and the disturbance-energy
bound Delta. The Lyapunov certificate P = (X0 * Y)^-1 comes out of the same
solution. Stage 2 then fixes (P, K) and finds trigger parameters
(alpha, beta, delta) through a second inequality, reusing gamma where it
still certifies (re-optimizing it when not), yielding a dynamic
event-triggering mechanism with provable decay and a positive minimum
inter-event time.

Both stages run on :mod:`detec.lmi_core`; every returned point is
re-verified here by eigenvalue checks on the unshifted inequalities,
independent of the solver. Closed-form certificate scalars (decay rates,
disturbance gain, quantizer limits) live in :class:`Certificates`.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .data_collection import DataMatrices, check_rank
from .exceptions import ConfigError, DataRankError, InfeasibleError, NumericalError
from .lmi_core import AffineLmi, solve_feasibility, strictness_epsilon

__all__ = [
    "DesignOptions",
    "SynthesisResult",
    "Certificates",
    "solve_design_lmi",
    "compute_gain",
    "solve_Q",
    "compute_G",
    "solve_trigger_lmi",
    "design_margin",
    "trigger_margin",
    "certificates",
    "miet_lower_bound",
    "synthesize",
    "save_result",
    "load_result",
]

GAMMA_BOUNDS = (1e-4, 1e6)
DELTA_BOUNDS = (1e-3, 1e6)
BETA_BOUNDS = (1e-9, 1e6)
ALPHA_MAX = 1e6


@dataclass(frozen=True)
class DesignOptions:
    """Solver knobs for the two synthesis stages.

    ``omega`` is the desired state-decay weight (SPD, n x n); a larger
    omega demands faster closed-loop decay. ``s_cap`` caps the largest
    eigenvalue of X0*Y: the stage-1 feasible set is a cone, so without a
    cap the margin objective runs to the variable box. ``s_floor`` keeps
    the smallest eigenvalue of X0*Y away from zero; since
    ``K = U0 Y (X0 Y)^-1``, a collapsing eigenvalue turns a small-norm Y
    into an enormous gain. Both rails assume omega entries of order one
    to ten; rescale them together with omega. ``trigger_objective`` is
    ``"min_beta"`` (smaller beta lengthens inter-event times) or
    ``"max_margin"``.
    """

    omega: np.ndarray
    alpha_min: float = 1e-6
    trigger_objective: str = "min_beta"
    reoptimize_gamma: bool = False
    s_cap: float = 150.0
    s_floor: float = 0.5
    design_slack: float = 1.0
    eps_rel: float = 1e-6

    def __post_init__(self):
        omega = np.atleast_2d(np.asarray(self.omega, dtype=float))
        if omega.shape[0] != omega.shape[1]:
            raise ValueError("omega must be square")
        if np.abs(omega - omega.T).max() > 1e-9 * max(1.0, np.abs(omega).max()):
            raise ValueError("omega must be symmetric")
        omega = 0.5 * (omega + omega.T)
        if np.linalg.eigvalsh(omega).min() <= 0.0:
            raise ValueError("omega must be positive definite")
        object.__setattr__(self, "omega", omega)
        if self.alpha_min <= 0.0:
            raise ValueError("alpha_min must be positive")
        if self.trigger_objective not in ("min_beta", "max_margin"):
            raise ValueError("trigger_objective must be 'min_beta' or 'max_margin'")
        if self.s_cap <= 0.0:
            raise ValueError("s_cap must be positive")
        if not 0.0 < self.s_floor < self.s_cap:
            raise ValueError("s_floor must lie strictly between 0 and s_cap")
        if self.design_slack <= 0.0:
            raise ValueError("design_slack must be positive")


@dataclass(frozen=True)
class SynthesisResult:
    """Everything the on-line side needs, plus the design-time evidence."""

    K: np.ndarray  # (m, n) feedback gain
    Y: np.ndarray  # (tau, n) stage-1 matrix variable
    gamma: float  # multiplier shared by both stages
    P: np.ndarray  # (n, n) SPD Lyapunov matrix, (X0 Y)^-1
    Q: np.ndarray  # (tau, n) data-consistent representation of [K; 0]
    G: np.ndarray  # (tau, n) data-consistent representation of [K; I]
    alpha: float  # trigger weight on |x|^2
    beta: float  # trigger weight on |e|^2
    delta: float  # trigger/Lyapunov coupling weight
    omega: np.ndarray  # (n, n) decay weight used in stage 1
    margins: dict  # {"design": float, "trigger": float}, re-verified slack

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def m(self) -> int:
        return self.K.shape[0]


@dataclass(frozen=True)
class Certificates:
    """Closed-form guarantees derived from a synthesis result.

    ``decay_rate`` bounds the exponential decay of the combined Lyapunov
    function between events; ``disturbance_gain`` multiplies |d|^2 in the
    dissipation inequality; the ``_uniform``/``_log`` variants cover the
    quantized controllers. ``theta_max`` is the largest logarithmic
    quantizer coarseness with a convergence guarantee, and
    ``quant_offset_rate * theta^2`` is the constant offset a uniform
    quantizer of resolution theta adds to the dissipation inequality.
    """

    decay_rate: float
    disturbance_gain: float
    decay_rate_uniform: float
    decay_rate_log: float
    theta_max: float
    quant_offset_rate: float

    def quantization_offset(self, theta: float) -> float:
        """Dissipation offset of the uniform quantizer at resolution theta."""
        return self.quant_offset_rate * float(theta) ** 2


def miet_lower_bound(fbar: float, beta: float, e_bound: float) -> float:
    """Guaranteed minimum inter-event time ``fbar / (beta*e_bound^2 + fbar)``.

    ``e_bound`` is a bound on the measurement-error norm along the run;
    with the trigger state reset to ``fbar`` after each event, no further
    event can occur before this many seconds have passed.
    """
    if fbar <= 0.0:
        raise ValueError("fbar must be positive")
    if beta < 0.0 or e_bound < 0.0:
        raise ValueError("beta and e_bound must be nonnegative")
    return fbar / (beta * e_bound**2 + fbar)


def _symmetry_basis(X0: np.ndarray) -> np.ndarray:
    """Orthonormal basis of {vec Y : X0 Y symmetric} (C-order vec)."""
    n, tau = X0.shape
    if n == 1:
        return np.eye(tau)
    rows = []
    for a in range(n):
        for b in range(a + 1, n):
            row = np.zeros(tau * n)
            for j in range(tau):
                row[j * n + b] += X0[a, j]
                row[j * n + a] -= X0[b, j]
            rows.append(row)
    basis = scipy.linalg.null_space(np.asarray(rows))
    if basis.shape[1] == 0:
        raise NumericalError("no Y direction keeps X0*Y symmetric; data looks degenerate")
    return basis


def _unvec(w: np.ndarray, tau: int, n: int) -> np.ndarray:
    return w.reshape(tau, n)


def design_margin(data: DataMatrices, omega: np.ndarray, Y: np.ndarray, gamma: float) -> float:
    """Stage-1 slack of the unshifted inequality at a candidate point.

    Returns min(-lambda_max of the design inequality, lambda_min(X0 Y));
    positive means strictly feasible.
    """
    n, tau = data.n, data.tau
    X1Y = data.X1 @ Y
    ddt = data.Delta @ data.Delta.T
    M = np.block(
        [
            [X1Y + X1Y.T + omega + gamma * ddt, Y.T],
            [Y, -gamma * np.eye(tau)],
        ]
    )
    S = data.X0 @ Y
    S = 0.5 * (S + S.T)
    return float(min(-np.linalg.eigvalsh(M).max(), np.linalg.eigvalsh(S).min()))


def solve_design_lmi(
    data: DataMatrices, options: DesignOptions
) -> tuple[np.ndarray, float, float]:
    """Stage 1: find (Y, gamma) making the data-driven design inequality hold.

    Two solves over Y restricted to directions keeping X0*Y symmetric.
    Phase A maximizes the slack of the design inequality alone (subject to
    the X0*Y eigenvalue rails) to learn the attainable margin t*. Phase B
    re-solves with the design slack floored at min(design_slack, t*/2) and
    minimizes the Frobenius norm of Y. Margin maximizers are aggressive:
    they return large gains and ill-conditioned Lyapunov matrices, which
    poison the trigger stage. The minimum-norm point instead lets
    open-loop-stable directions carry themselves and spends gain only
    where the slack floor demands it.

    Returns
    -------
    (Y, gamma, margin)
        ``margin`` is the re-verified slack of the unshifted inequality (> 0).

    Raises
    ------
    InfeasibleError
        No point with positive slack exists (stage "design").
    NumericalError
        The solver gave up before reaching a verdict.
    """
    n, tau = data.n, data.tau
    omega = options.omega
    if omega.shape != (n, n):
        raise ValueError(f"omega must be {n} x {n} for this data set")
    X0, X1 = data.X0, data.X1
    ddt = data.Delta @ data.Delta.T
    basis = _symmetry_basis(X0)
    r = basis.shape[1]
    size = n + tau

    w_ids = [f"w{i:03d}" for i in range(r)]
    design_blocks = []
    pos_blocks = []
    cap_blocks = []
    for i, vid in enumerate(w_ids):
        Yi = _unvec(basis[:, i], tau, n)
        X1Yi = X1 @ Yi
        top = X1Yi + X1Yi.T
        blk = np.zeros((size, size))
        blk[:n, :n] = top
        blk[:n, n:] = Yi.T
        blk[n:, :n] = Yi
        design_blocks.append((vid, blk))
        SYi = X0 @ Yi
        SYi = 0.5 * (SYi + SYi.T)  # exactly symmetric by basis construction
        pos_blocks.append((vid, -SYi))
        cap_blocks.append((vid, SYi))
    gamma_blk = np.zeros((size, size))
    gamma_blk[:n, :n] = ddt
    gamma_blk[n:, n:] = -np.eye(tau)
    design_blocks.append(("gamma", gamma_blk))

    eps = strictness_epsilon(
        omega, *(B for _, B in design_blocks), rel=options.eps_rel
    )
    const_design = np.zeros((size, size))
    const_design[:n, :n] = omega + eps * np.eye(n)
    const_design[n:, n:] = eps * np.eye(tau)

    positivity = AffineLmi(
        (eps + options.s_floor) * np.eye(n), pos_blocks, {}, name="positivity"
    )
    cap = AffineLmi(-options.s_cap * np.eye(n), cap_blocks, {}, name="normalization")

    # Phase A: how much design slack does the data support at all?
    probe_blocks = design_blocks + [("slack", np.eye(size))]
    probe = AffineLmi(
        const_design, probe_blocks, {"gamma": GAMMA_BOUNDS}, name="design"
    )
    with warnings.catch_warnings():
        # The probe point is discarded (only the slack level survives), and
        # with Delta = 0 nothing caps gamma, so it legitimately rides its box.
        warnings.filterwarnings("ignore", message="variable .* sits at its bound box")
        res_a = solve_feasibility(
            [probe, positivity, cap], objective=("maximize", "slack")
        )
    if res_a.status == "max_iter":
        raise NumericalError("design-stage LMI solver did not converge")
    # The optimum sits on the constraint boundary, so the returned point can
    # overshoot the true maximum by the solver tolerance. Back the claimed
    # slack off by the verified violation instead of rejecting outright;
    # phase B re-solves and the final point is re-verified anyway.
    t_star = res_a.variables.get("slack", -np.inf) + min(0.0, res_a.margin)
    if not np.isfinite(t_star) or t_star <= 0.0:
        raise InfeasibleError(
            "design-stage inequality infeasible: the data admits no certified "
            "stabilizing gain at this disturbance bound",
            stage="design",
            margin=min(res_a.margin, t_star),
        )
    # Phase B: smallest Y meeting an absolute slack target (halved when the
    # data cannot support it). The norm bound |w| <= s is the usual Schur
    # embedding; with an orthonormal basis, |w| equals the Frobenius norm
    # of Y.
    floor = min(options.design_slack, 0.5 * t_star)
    design_b = AffineLmi(
        const_design + floor * np.eye(size),
        design_blocks,
        {"gamma": GAMMA_BOUNDS},
        name="design",
    )
    norm_blocks = []
    for i, vid in enumerate(w_ids):
        E = np.zeros((r + 1, r + 1))
        E[i, r] = -1.0
        E[r, i] = -1.0
        norm_blocks.append((vid, E))
    norm_blocks.append(("s", -np.eye(r + 1)))
    norm_bound = AffineLmi(np.zeros((r + 1, r + 1)), norm_blocks, {}, name="norm")
    with warnings.catch_warnings():
        # gamma is refit below; the solver parking it at a bound is harmless.
        warnings.filterwarnings(
            "ignore", message="variable 'gamma' sits at its bound box"
        )
        res_b = solve_feasibility(
            [design_b, positivity, cap, norm_bound], objective=("minimize", "s")
        )
    if res_b.status == "infeasible":
        raise InfeasibleError(
            "design-stage inequality infeasible at the targeted slack",
            stage="design",
            margin=res_b.margin,
        )
    if res_b.status != "feasible":
        raise NumericalError(
            "design-stage norm minimization failed after a feasible margin probe"
        )
    w = np.array([res_b.variables[vid] for vid in w_ids])
    Y = _unvec(basis @ w, tau, n)
    # The norm objective exerts no downward pressure on gamma (with Delta = 0
    # a larger gamma only relaxes the coupling), so the solver parks it
    # anywhere up to the box. Refit it at the fixed Y with a deterministic
    # 1-D sweep: the smallest gamma whose re-verified margin matches the best
    # on a log grid. Cheap (one eigensolve per grid point) and it keeps the
    # returned multiplier meaningfully scaled.
    gamma = float(res_b.variables["gamma"])
    margin = design_margin(data, omega, Y, gamma)
    grid = np.geomspace(GAMMA_BOUNDS[0], GAMMA_BOUNDS[1], 241)
    sweep = np.array([design_margin(data, omega, Y, g) for g in grid])
    target = max(float(sweep.max()), margin)
    tol = 1e-9 * max(1.0, abs(target))
    near = np.nonzero(sweep >= target - tol)[0]
    if near.size and (margin < target - tol or grid[near[0]] < gamma):
        gamma = float(grid[near[0]])
        margin = float(sweep[near[0]])
    if margin <= 0.0:
        raise NumericalError(
            f"stage-1 point failed independent re-verification (margin {margin:.3e})"
        )
    return Y, gamma, margin


def compute_gain(data: DataMatrices, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Feedback gain and Lyapunov matrix from a stage-1 solution.

    ``K = U0 Y (X0 Y)^-1`` and ``P = (X0 Y)^-1``. Raises
    :class:`NumericalError` if X0*Y is detectably asymmetric or not
    positive definite.
    """
    S = data.X0 @ Y
    scale = max(1.0, np.abs(S).max())
    if np.abs(S - S.T).max() > 1e-9 * scale:
        raise NumericalError("X0*Y is not symmetric; gain reconstruction is unsound")
    S = 0.5 * (S + S.T)
    eig = np.linalg.eigvalsh(S)
    if eig.min() <= 0.0:
        raise NumericalError("X0*Y is not positive definite; no Lyapunov certificate")
    P = np.linalg.inv(S)
    P = 0.5 * (P + P.T)
    K = data.U0 @ Y @ P
    return K, P


def solve_Q(data: DataMatrices, K: np.ndarray) -> np.ndarray:
    """Minimum-norm Q with ``U0 Q = K`` and ``X0 Q = 0``.

    Exists whenever [U0; X0] has full row rank; the residual is checked.
    """
    W = np.vstack([data.U0, data.X0])
    rhs = np.vstack([K, np.zeros((data.n, data.n))])
    Q, *_ = np.linalg.lstsq(W, rhs, rcond=None)
    resid = np.linalg.norm(W @ Q - rhs)
    if resid > 1e-8 * max(1.0, np.linalg.norm(K)):
        raise NumericalError(
            f"no data-consistent representation of the gain (residual {resid:.3e}); "
            "check the data rank"
        )
    return Q


def compute_G(data: DataMatrices, Y: np.ndarray, P: np.ndarray) -> np.ndarray:
    """G = Y P, the data-consistent representation with ``U0 G = K, X0 G = I``."""
    return Y @ P


def trigger_margin(
    data: DataMatrices,
    P: np.ndarray,
    Q: np.ndarray,
    omega: np.ndarray,
    gamma: float,
    alpha: float,
    beta: float,
    delta: float,
) -> float:
    """Stage-2 slack of the unshifted inequality: -lambda_max of the block matrix."""
    M = _trigger_matrix(data, P, Q, omega, gamma, alpha, beta, delta)
    return float(-np.linalg.eigvalsh(M).max())


def _trigger_matrix(data, P, Q, omega, gamma, alpha, beta, delta):
    n = data.n
    pop = P @ omega @ P
    px1q = P @ (data.X1 @ Q)
    pdel = P @ data.Delta
    Z = np.zeros((n, n))
    eye = np.eye(n)
    return np.block(
        [
            [-(delta / 8.0) * pop + alpha * eye, delta * px1q, delta * pdel],
            [delta * px1q.T, gamma * (Q.T @ Q) - beta * eye, Z],
            [delta * pdel.T, Z, -gamma * eye],
        ]
    )


def solve_trigger_lmi(
    data: DataMatrices,
    P: np.ndarray,
    Q: np.ndarray,
    gamma: float,
    options: DesignOptions,
) -> tuple[float, float, float, float, float]:
    """Stage 2: trigger parameters (alpha, beta, delta) for fixed gain data.

    Smaller beta lengthens inter-event times, so beta is minimized, but
    only approximately: the exact minimum is a degenerate corner where the
    inequality pinches to singular and solvers return junk. Two facts make
    a robust scheme. Shrinking alpha only ever helps the (1,1) block, so
    alpha sits at alpha_min exactly. And the (2,2) block alone forces
    beta > gamma * lambda_max(Q^T Q). Starting at twice that anchor, beta
    walks a doubling ladder; each rung solves a well-posed max-margin
    problem in delta alone, and the first rung whose point passes the
    independent eigenvalue check wins. The result is within a factor of
    two of the smallest certifiable beta and keeps a healthy margin.

    The stage-1 gamma is reused as long as it certifies anything. It is a
    multiplier tuned for the design inequality though, and at high
    disturbance bounds it can sit below what this inequality needs to
    absorb its Delta coupling. When the reuse ladder exhausts, the ladder
    reruns with gamma free (a warning notes the switch); the returned
    gamma is then the one this inequality is certified at. Set
    ``options.reoptimize_gamma`` to skip reuse and free gamma from the
    start. ``options.trigger_objective="max_margin"`` replaces the ladder
    with a single margin-maximizing solve over (beta, delta).

    Returns
    -------
    (alpha, beta, delta, gamma, margin)
        ``margin`` is the re-verified slack of the unshifted inequality (> 0).
    """
    n = data.n
    omega = options.omega
    pop = P @ omega @ P
    px1q = P @ (data.X1 @ Q)
    pdel = P @ data.Delta
    Z = np.zeros((n, n))
    eye = np.eye(n)
    size = 3 * n
    alpha = options.alpha_min

    base_const = np.zeros((size, size))
    base_const[:n, :n] = alpha * eye
    beta_blk = np.zeros((size, size))
    beta_blk[n : 2 * n, n : 2 * n] = -eye
    delta_blk = np.block(
        [
            [-pop / 8.0, px1q, pdel],
            [px1q.T, Z, Z],
            [pdel.T, Z, Z],
        ]
    )
    gamma_blk = np.zeros((size, size))
    gamma_blk[n : 2 * n, n : 2 * n] = Q.T @ Q
    gamma_blk[2 * n :, 2 * n :] = -eye
    eps = strictness_epsilon(
        base_const, beta_blk, delta_blk, gamma_blk, rel=options.eps_rel
    )
    base_const = base_const + eps * np.eye(size)

    def attempt(beta_value, free_gamma, free_beta=False, extra_const=None):
        const = base_const + beta_value * beta_blk
        if extra_const is not None:
            const = const + extra_const
        blocks = [("delta", delta_blk)]
        bounds = {"delta": DELTA_BOUNDS}
        if free_gamma:
            blocks.append(("gamma", gamma_blk))
            bounds["gamma"] = GAMMA_BOUNDS
        if free_beta:
            blocks.append(("beta", beta_blk))
            bounds["beta"] = BETA_BOUNDS
        lmi = AffineLmi(const, blocks, bounds, name="trigger")
        return solve_feasibility([lmi], "max_margin")

    def ladder(anchor, free_gamma):
        fixed = None if free_gamma else gamma * gamma_blk
        worst = float("-inf")
        if anchor >= BETA_BOUNDS[1]:
            # No beta in the box clears the (2,2) necessity; nothing to try.
            return None, None, None, worst
        beta = min(max(2.0 * anchor, BETA_BOUNDS[0]), BETA_BOUNDS[1])
        while beta <= BETA_BOUNDS[1]:
            res = attempt(beta, free_gamma, extra_const=fixed)
            if res.status == "feasible":
                g = res.variables["gamma"] if free_gamma else gamma
                return beta, float(res.variables["delta"]), float(g), res.margin
            worst = max(worst, res.margin)
            beta *= 2.0
        return None, None, None, worst

    lam_qtq = float(max(np.linalg.eigvalsh(Q.T @ Q).max(), 0.0))

    if options.trigger_objective == "max_margin":
        fixed = None if options.reoptimize_gamma else gamma * gamma_blk
        res = attempt(
            0.0, options.reoptimize_gamma, free_beta=True, extra_const=fixed
        )
        if res.status != "feasible":
            raise InfeasibleError(
                "trigger-stage inequality infeasible for the synthesized gain",
                stage="trigger",
                margin=res.margin,
            )
        beta = float(res.variables["beta"])
        delta = float(res.variables["delta"])
        gamma_out = (
            float(res.variables["gamma"]) if options.reoptimize_gamma else float(gamma)
        )
    else:
        # With gamma fixed the (2,2) block makes beta > gamma * lam_qtq a hard
        # necessity, so that is the anchor. With gamma free it is a variable
        # that can shrink, so the ladder starts from the lowest anchor any
        # admissible gamma could give and climbs until a rung certifies.
        if options.reoptimize_gamma:
            beta, delta, gamma_out, worst = ladder(
                GAMMA_BOUNDS[0] * lam_qtq, free_gamma=True
            )
        else:
            beta, delta, gamma_out, worst = ladder(
                gamma * lam_qtq, free_gamma=False
            )
        if beta is None and not options.reoptimize_gamma:
            beta, delta, gamma_out, worst2 = ladder(
                GAMMA_BOUNDS[0] * lam_qtq, free_gamma=True
            )
            if beta is not None:
                warnings.warn(
                    f"stage-1 gamma ({gamma:.4g}) certifies no trigger point; "
                    f"re-optimized to {gamma_out:.4g}",
                    stacklevel=2,
                )
            worst = max(worst, worst2)
        if beta is None:
            raise InfeasibleError(
                "trigger-stage inequality infeasible for the synthesized gain "
                f"at any beta up to {BETA_BOUNDS[1]:g}",
                stage="trigger",
                margin=worst,
            )

    margin = trigger_margin(data, P, Q, omega, gamma_out, alpha, beta, delta)
    if margin <= 0.0:
        raise NumericalError(
            f"stage-2 point failed independent re-verification (margin {margin:.3e})"
        )
    return alpha, beta, delta, gamma_out, margin


def certificates(data: DataMatrices, result: SynthesisResult) -> Certificates:
    """Closed-form certificate scalars for a synthesis result."""
    P, omega = result.P, result.omega
    pop = P @ omega @ P
    lam_min_pop = float(np.linalg.eigvalsh(0.5 * (pop + pop.T)).min())
    lam_p = np.linalg.eigvalsh(P)
    lam_max_p = float(lam_p.max())
    if lam_min_pop <= 0.0 or lam_max_p <= 0.0:
        raise NumericalError("certificates need P and P*omega*P positive definite")
    decay = min(3.0 * lam_min_pop / (4.0 * lam_max_p), 1.0)
    iota = 8.0 * lam_max_p**2 / lam_min_pop
    decay_u = min(5.0 * lam_min_pop / (8.0 * lam_max_p), 1.0)
    decay_l = min(lam_min_pop / (2.0 * lam_max_p), 1.0)
    qn2 = float(np.linalg.norm(result.Q, 2) ** 2)
    norms = float(np.linalg.norm(data.X1, 2) ** 2 + np.linalg.norm(data.Delta, 2) ** 2)
    denom = iota * qn2 * norms
    if denom > 0.0:
        theta_max = 2.0 * math.log1p(0.25 * math.sqrt(lam_min_pop / denom))
    else:
        theta_max = float("inf")
    n = result.n
    offset_rate = 0.5 * iota * n * qn2 * norms + result.alpha * n / (4.0 * result.delta)
    return Certificates(
        decay_rate=decay,
        disturbance_gain=iota,
        decay_rate_uniform=decay_u,
        decay_rate_log=decay_l,
        theta_max=theta_max,
        quant_offset_rate=offset_rate,
    )


def synthesize(data: DataMatrices, options: DesignOptions) -> tuple[SynthesisResult, Certificates]:
    """Full pipeline: rank check, both LMI stages, auxiliaries, certificates."""
    if not check_rank(data.U0, data.X0):
        raise DataRankError(
            "the stacked data matrix [U0; X0] is not full row rank; collect more "
            "samples or excite the plant with a richer input"
        )
    Y, gamma, m_design = solve_design_lmi(data, options)
    K, P = compute_gain(data, Y)
    Q = solve_Q(data, K)
    G = compute_G(data, Y, P)
    alpha, beta, delta, gamma, m_trigger = solve_trigger_lmi(data, P, Q, gamma, options)
    result = SynthesisResult(
        K=K,
        Y=Y,
        gamma=gamma,
        P=P,
        Q=Q,
        G=G,
        alpha=alpha,
        beta=beta,
        delta=delta,
        omega=options.omega,
        margins={"design": m_design, "trigger": m_trigger},
    )
    return result, certificates(data, result)


def save_result(path, result: SynthesisResult, cert: Certificates, meta: Optional[dict] = None):
    """Write a synthesis result (and its certificates) as JSON.

    Matrices are stored row-major; floats keep full precision (exact
    round-trip through ``float(repr(x))``).
    """
    payload = {
        "meta": dict(meta or {}),
        "K": result.K.tolist(),
        "Y": result.Y.tolist(),
        "gamma": result.gamma,
        "P": result.P.tolist(),
        "Q": result.Q.tolist(),
        "G": result.G.tolist(),
        "alpha": result.alpha,
        "beta": result.beta,
        "delta": result.delta,
        "omega": result.omega.tolist(),
        "margins": result.margins,
        "certificates": {
            "decay_rate": cert.decay_rate,
            "disturbance_gain": cert.disturbance_gain,
            "decay_rate_uniform": cert.decay_rate_uniform,
            "decay_rate_log": cert.decay_rate_log,
            "theta_max": None if math.isinf(cert.theta_max) else cert.theta_max,
            "quant_offset_rate": cert.quant_offset_rate,
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_result(path) -> tuple[SynthesisResult, Certificates]:
    """Read back a JSON file written by :func:`save_result`."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    try:
        result = SynthesisResult(
            K=np.asarray(payload["K"], dtype=float),
            Y=np.asarray(payload["Y"], dtype=float),
            gamma=float(payload["gamma"]),
            P=np.asarray(payload["P"], dtype=float),
            Q=np.asarray(payload["Q"], dtype=float),
            G=np.asarray(payload["G"], dtype=float),
            alpha=float(payload["alpha"]),
            beta=float(payload["beta"]),
            delta=float(payload["delta"]),
            omega=np.asarray(payload["omega"], dtype=float),
            margins={k: float(v) for k, v in payload["margins"].items()},
        )
        c = payload["certificates"]
        cert = Certificates(
            decay_rate=float(c["decay_rate"]),
            disturbance_gain=float(c["disturbance_gain"]),
            decay_rate_uniform=float(c["decay_rate_uniform"]),
            decay_rate_log=float(c["decay_rate_log"]),
            theta_max=float("inf") if c["theta_max"] is None else float(c["theta_max"]),
            quant_offset_rate=float(c["quant_offset_rate"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: missing or malformed field: {exc}") from exc
    return result, cert
