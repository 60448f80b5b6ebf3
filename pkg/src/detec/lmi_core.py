"""Small dense linear-matrix-inequality feasibility problems.

A problem is a list of :class:`AffineLmi` constraints over a shared set of
named scalar variables, each demanding

    M(v) = constant + sum_i v_i * block_i  <=  0   (negative semidefinite).

:func:`solve_feasibility` solves them with an interior-point conic solver
under one of three objectives: maximize the common margin t with
``M(v) <= -t*I`` (feasibility with slack), or minimize/maximize one chosen
variable subject to plain feasibility. Every variable lives in a finite box
(default ``[-1e6, 1e6]``); hitting a box edge raises a warning because it
usually means the problem wanted normalization, not that the bound is real.

Returned points are re-verified here by a plain eigenvalue check
(:func:`is_negative_semidefinite`), independent of the solver.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

__all__ = [
    "AffineLmi",
    "FeasibilityResult",
    "DEFAULT_BOUND",
    "is_negative_semidefinite",
    "strictness_epsilon",
    "evaluate_lmi",
    "solve_feasibility",
]

DEFAULT_BOUND = 1e6
SYMMETRY_RTOL = 1e-9


def _check_symmetric(M: np.ndarray, what: str) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"{what} must be square, got shape {M.shape}")
    scale = max(1.0, np.abs(M).max())
    if np.abs(M - M.T).max() > SYMMETRY_RTOL * scale:
        raise ValueError(f"{what} must be symmetric")
    return 0.5 * (M + M.T)


@dataclass(frozen=True)
class AffineLmi:
    """One affine matrix-inequality constraint ``M(v) <= 0``.

    Parameters
    ----------
    constant_block : (s, s) symmetric array
    coefficient_blocks : list of (variable id, (s, s) symmetric array)
        ``M(v) = constant_block + sum v_id * block``.
    variable_bounds : dict, optional
        Per-variable ``(lo, hi)`` box. Variables without an entry default
        to ``[-DEFAULT_BOUND, DEFAULT_BOUND]``.
    name : str
        Used in diagnostics.
    """

    constant_block: np.ndarray
    coefficient_blocks: list[tuple[str, np.ndarray]]
    variable_bounds: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        C = _check_symmetric(self.constant_block, f"constant block of {self.name or 'LMI'}")
        object.__setattr__(self, "constant_block", C)
        seen = set()
        blocks = []
        for vid, B in self.coefficient_blocks:
            if vid in seen:
                raise ValueError(f"duplicate coefficient block for variable {vid!r}")
            seen.add(vid)
            B = _check_symmetric(B, f"coefficient block {vid!r} of {self.name or 'LMI'}")
            if B.shape != C.shape:
                raise ValueError(
                    f"coefficient block {vid!r} has shape {B.shape}, expected {C.shape}"
                )
            blocks.append((vid, B))
        object.__setattr__(self, "coefficient_blocks", blocks)
        for vid, (lo, hi) in self.variable_bounds.items():
            if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
                raise ValueError(f"bad bounds {lo, hi} for variable {vid!r}")

    @property
    def size(self) -> int:
        return self.constant_block.shape[0]

    def scale(self) -> float:
        """Problem scale: the largest Frobenius norm over all blocks."""
        norms = [np.linalg.norm(self.constant_block)]
        norms += [np.linalg.norm(B) for _, B in self.coefficient_blocks]
        return max(norms)


@dataclass(frozen=True)
class FeasibilityResult:
    """Outcome of a feasibility solve.

    ``status`` is ``"feasible"``, ``"infeasible"``, or ``"max_iter"``.
    ``margin`` is the verified slack at the returned point: the largest t
    with ``M(v) <= -t*I`` across all constraints (negative when the point
    violates some constraint; ``-inf`` when no point is available).
    """

    status: str
    variables: dict
    margin: float


def strictness_epsilon(*matrices, rel: float = 1e-6) -> float:
    """Shift used to encode strict inequalities as ``M <= -eps*I``.

    ``eps = rel * max Frobenius norm`` over the blocks involved.
    """
    norms = [np.linalg.norm(np.asarray(M, dtype=float)) for M in matrices]
    top = max(norms) if norms else 0.0
    return rel * max(top, 1.0)


def is_negative_semidefinite(M, tol: float = 0.0) -> bool:
    """Eigenvalue test ``lambda_max(M) <= tol`` for symmetric M.

    Asymmetric input (beyond a tight relative tolerance) raises
    ``ValueError`` rather than being silently symmetrized.
    """
    M = _check_symmetric(M, "matrix")
    return bool(np.linalg.eigvalsh(M).max() <= tol)


def evaluate_lmi(lmi: AffineLmi, variables: dict) -> np.ndarray:
    """Evaluate ``M(v)`` at a point given as ``{variable id: value}``."""
    M = lmi.constant_block.copy()
    for vid, B in lmi.coefficient_blocks:
        if vid not in variables:
            raise ValueError(f"missing value for variable {vid!r}")
        M += float(variables[vid]) * B
    return M


def _merged_bounds(constraints: list[AffineLmi]) -> dict:
    bounds: dict[str, tuple[float, float]] = {}
    for lmi in constraints:
        ids = [vid for vid, _ in lmi.coefficient_blocks]
        for vid in ids:
            if vid not in bounds:
                bounds[vid] = (-DEFAULT_BOUND, DEFAULT_BOUND)
        for vid, (lo, hi) in lmi.variable_bounds.items():
            old = bounds.get(vid, (-DEFAULT_BOUND, DEFAULT_BOUND))
            bounds[vid] = (max(old[0], lo), min(old[1], hi))
    for vid, (lo, hi) in bounds.items():
        if lo > hi:
            raise ValueError(f"empty bound box for variable {vid!r}: {(lo, hi)}")
    return bounds


def margin_at(constraints: list[AffineLmi], variables: dict) -> float:
    """Verified common margin at a point: min over constraints of -lambda_max."""
    worst = np.inf
    for lmi in constraints:
        lam = np.linalg.eigvalsh(evaluate_lmi(lmi, variables)).max()
        worst = min(worst, -lam)
    return float(worst)


def solve_feasibility(constraints, objective="max_margin") -> FeasibilityResult:
    """Solve an LMI system for a feasible (or optimal) point.

    Parameters
    ----------
    constraints : list of AffineLmi
        Constraints over a shared variable set.
    objective : "max_margin" or ("minimize", var_id) or ("maximize", var_id)
        ``max_margin`` maximizes the common slack t in ``M(v) <= -t*I``;
        the verdict is feasible only if the best slack is positive.

    Returns
    -------
    FeasibilityResult
        The margin is always re-verified with an eigenvalue check at the
        returned point, independent of the solver's own report.
    """
    constraints = list(constraints)
    if not constraints:
        raise ValueError("need at least one constraint")
    bounds = _merged_bounds(constraints)
    var_ids = sorted(bounds)
    if not var_ids:
        # No free variables: the verdict is a pure eigenvalue check.
        m = margin_at(constraints, {})
        return FeasibilityResult("feasible" if m >= 0.0 else "infeasible", {}, m)

    cvars = {vid: cp.Variable(name=vid) for vid in var_ids}
    cons = []
    for vid in var_ids:
        lo, hi = bounds[vid]
        cons.append(cvars[vid] >= lo)
        cons.append(cvars[vid] <= hi)

    if objective == "max_margin":
        t = cp.Variable(name="_margin")
        goal = cp.Maximize(t)
    elif (
        isinstance(objective, tuple)
        and len(objective) == 2
        and objective[0] in ("minimize", "maximize")
    ):
        sense, target = objective
        if target not in cvars:
            raise ValueError(f"objective variable {target!r} not present in the constraints")
        t = None
        goal = cp.Minimize(cvars[target]) if sense == "minimize" else cp.Maximize(cvars[target])
    else:
        raise ValueError(f"unknown objective {objective!r}")

    for lmi in constraints:
        expr = cp.Constant(lmi.constant_block)
        for vid, B in lmi.coefficient_blocks:
            expr = expr + cvars[vid] * cp.Constant(B)
        if t is not None:
            expr = expr + t * cp.Constant(np.eye(lmi.size))
        cons.append(expr << 0)

    problem = cp.Problem(goal, cons)
    # The verdict below re-checks the returned point with exact eigenvalue
    # arithmetic, so the solver's "may be inaccurate" advisory is redundant.
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="Solution may be inaccurate")
        try:
            problem.solve(solver=cp.CLARABEL)
        except cp.error.SolverError:
            try:
                problem.solve(solver=cp.SCS)
            except cp.error.SolverError:
                return FeasibilityResult("max_iter", {}, float("-inf"))

    status = problem.status
    if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        return FeasibilityResult("infeasible", {}, float("-inf"))
    if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        return FeasibilityResult("max_iter", {}, float("-inf"))

    values = {vid: float(cvars[vid].value) for vid in var_ids}
    margin = margin_at(constraints, values)
    if objective == "max_margin":
        verdict = "feasible" if margin > 0.0 else "infeasible"
    else:
        # Objective solves park the optimum on the constraint boundary, so
        # allow solver-tolerance slack when judging the verdict.
        scale = max(lmi.scale() for lmi in constraints)
        verdict = "feasible" if margin >= -1e-9 * max(1.0, scale) else "infeasible"
    if verdict == "feasible":
        for vid in var_ids:
            lo, hi = bounds[vid]
            if hi <= lo:
                continue
            at_lo = values[vid] - lo <= 1e-6 * max(1.0, abs(lo))
            at_hi = hi - values[vid] <= 1e-6 * max(1.0, abs(hi))
            if at_lo or at_hi:
                warnings.warn(
                    f"variable {vid!r} sits at its bound box ({values[vid]:.6g}); "
                    "consider widening the bounds or normalizing the problem",
                    stacklevel=2,
                )
    return FeasibilityResult(verdict, values, margin)
