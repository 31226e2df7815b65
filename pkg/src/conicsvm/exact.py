"""Exact 0-1 loss SVM on small instances: enumeration and branch-and-bound.

For a fixed indicator vector ``z`` the problem is ``min ||w||^2`` subject to
``y_i x_i^T w >= 1`` (``z_i = 0``) and ``y_i x_i^T w <= 1`` (``z_i = 1``), a
least-distance program. These are solved through the Lawson-Hanson reduction
to nonnegative least squares, independently of the conic solver used for the
relaxations.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import lsq_linear, nnls

from .conic import ConicStatus, InfeasibleError, SolverSettings
from .core import InputError, LabeledDataset
from .formulations import (
    Form,
    SvmHyperparams,
    build_bigm_relaxation,
    build_conic_sdp,
    default_big_m,
)

log = logging.getLogger(__name__)

FEAS_TOL = 1e-6
MAX_ENUMERATION_N = 20


class Method(str, enum.Enum):
    ENUMERATION = "Enumeration"
    BRANCH_AND_BOUND = "BranchAndBound"


class Relaxation(str, enum.Enum):
    BIGM = "BigM"
    CONIC_SDP = "ConicSdp"


@dataclass(frozen=True)
class ExactResult:
    objective: float
    z_assignment: np.ndarray
    weights: np.ndarray
    nodes_explored: int
    method: Method
    optimal: bool = True
    lower_bound: float = float("nan")

    @property
    def gap(self) -> float:
        if self.optimal:
            return 0.0
        return (self.objective - self.lower_bound) / max(abs(self.objective), 1e-12)


def _nnls(E, f, tol: float = 1e-10) -> np.ndarray:
    """Nonnegative least squares, KKT-verified.

    ``scipy.optimize.nnls`` occasionally stops at a non-stationary point on
    degenerate inputs; those cases are re-solved with BVLS.
    """
    try:
        u, _ = nnls(E, f, maxiter=50 * E.shape[1] + 50)
    except RuntimeError:
        u = None
    if u is not None:
        grad = E.T @ (E @ u - f)
        scale = tol * (1.0 + np.abs(E).max() * (1.0 + np.abs(u).max()))
        if grad.min() >= -scale and np.all(np.abs(grad[u > 0]) <= scale):
            return u
    res = lsq_linear(E, f, bounds=(0.0, np.inf), method="bvls", tol=1e-14)
    return np.maximum(res.x, 0.0)


def least_distance(G, h) -> Optional[np.ndarray]:
    """Minimum-norm ``w`` with ``G w >= h``, or ``None`` if infeasible."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    h = np.asarray(h, dtype=float).ravel()
    m, p = G.shape
    if m == 0:
        return np.zeros(p)
    E = np.vstack([G.T, h[None, :]])
    f = np.zeros(p + 1)
    f[-1] = 1.0
    u = _nnls(E, f)
    r = E @ u - f
    if np.linalg.norm(r) <= 1e-10 or r[-1] >= 0:
        return None
    w = -r[:p] / r[-1]
    if np.any(G @ w < h - FEAS_TOL * (1.0 + np.abs(h))):
        return None
    return w


def fixed_z_subproblem(data: LabeledDataset, z, strict: bool = True) -> Optional[np.ndarray]:
    """Optimal weights for a fixed ``z`` (``None`` if infeasible).

    With ``strict=False`` points with ``z_i = 1`` are unconstrained, as in the
    big-M model.
    """
    z = np.asarray(z).astype(bool)
    A = data.signed_features
    if strict:
        G = np.where(z[:, None], -A, A)
        h = np.where(z, -1.0, 1.0)
    else:
        G, h = A[~z], np.ones((~z).sum())
    return least_distance(G, h)


def _objective(w, z, lam) -> float:
    return float(w @ w + lam * np.sum(z))


def solve_enumeration(data: LabeledDataset, lam: float, max_n: int = MAX_ENUMERATION_N) -> ExactResult:
    """Global optimum of ``min ||w||^2 + lam sum z`` over all ``z`` in {0,1}^n.

    Assignments are visited in lexicographic order and only strict
    improvements replace the incumbent, so ties go to the smallest ``z``.
    """
    if not lam > 0:
        raise InputError("lambda must be positive")
    if data.n > max_n:
        raise InputError(f"enumeration limited to n <= {max_n} (got {data.n})")
    best_obj, best_z, best_w = np.inf, None, None
    visited = 0
    for bits in itertools.product((0, 1), repeat=data.n):
        floor = lam * sum(bits)
        if floor >= best_obj:
            continue
        visited += 1
        w = fixed_z_subproblem(data, bits)
        if w is None:
            continue
        obj = _objective(w, bits, lam)
        if best_z is None or obj < best_obj - 1e-12 * (1.0 + abs(best_obj)):
            best_obj, best_z, best_w = obj, np.array(bits), w
    return ExactResult(best_obj, best_z, best_w, visited, Method.ENUMERATION, True, best_obj)


def _incumbent_from(data: LabeledDataset, lam: float, w) -> tuple:
    """Feasible assignment built from a (relaxation) weight vector."""
    z = (data.signed_features @ w < 1.0 - FEAS_TOL).astype(int)
    w2 = fixed_z_subproblem(data, z)
    if w2 is None:
        w2 = np.asarray(w, dtype=float)
    # Canonical labels for the improved weights never cost more.
    z2 = (data.signed_features @ w2 < 1.0 - FEAS_TOL).astype(int)
    w3 = fixed_z_subproblem(data, z2)
    if w3 is not None and _objective(w3, z2, lam) <= _objective(w2, z2, lam):
        w2 = w3
    return _objective(w2, z2, lam), z2, w2


def _node_bound(data, lam, fixed, relaxation, big_m, settings):
    """(status, bound, w, z) for the relaxation with the given fixings."""
    # The relaxation is feasible iff the fixed margin constraints are.
    idx = np.array(sorted(fixed), dtype=int)
    if idx.size and fixed_z_subproblem(
            data.subset(idx), [fixed[i] for i in idx], strict=relaxation is Relaxation.CONIC_SDP) is None:
        return "infeasible", np.inf, None, None
    if relaxation is Relaxation.CONIC_SDP:
        model = build_conic_sdp(data, SvmHyperparams(Form.CONIC_SDP_PENALTY, lam=lam), fixed=fixed)
        sol = model.solve(settings)
        if sol.status is ConicStatus.ITERATION_LIMIT and settings != SolverSettings():
            sol = model.solve(SolverSettings())
        if sol.status is ConicStatus.PRIMAL_INFEASIBLE:
            return "infeasible", np.inf, None, None
        if sol.status not in (ConicStatus.OPTIMAL, ConicStatus.INACCURATE):
            return "failed", -np.inf, None, None
        bound = min(sol.primal_objective, sol.dual_objective)
        return "ok", bound, model.weights(sol), np.clip(model.z_values(sol), 0.0, 1.0)
    lo, hi = np.zeros(data.n), np.ones(data.n)
    for i, b in fixed.items():
        lo[i] = hi[i] = b
    model = build_bigm_relaxation(data, lam, big_m, lo, hi)
    try:
        sol = model.solve()
    except InfeasibleError:
        return "infeasible", np.inf, None, None
    if sol.status not in (ConicStatus.OPTIMAL, ConicStatus.INACCURATE):
        return "failed", -np.inf, None, None
    return "ok", sol.objective, model.weights(sol), np.clip(model.z_values(sol), 0.0, 1.0)


def solve_branch_and_bound(data: LabeledDataset, lam: float,
                           relaxation: Relaxation = Relaxation.CONIC_SDP,
                           node_limit: int = 10000, big_m: Optional[float] = None,
                           settings: SolverSettings = SolverSettings(1e-9, 1e-9),
                           prune_tol: float = 1e-7) -> ExactResult:
    """Best-first branch-and-bound on ``z`` with most-fractional branching.

    Node bounds come from the big-M relaxation or the conic SDP with the
    branched indicators fixed. If ``node_limit`` relaxations are solved
    before the tree is exhausted, the best incumbent is returned with
    ``optimal=False`` and the remaining lower bound.
    """
    if not lam > 0:
        raise InputError("lambda must be positive")
    relaxation = Relaxation(relaxation)
    if relaxation is Relaxation.BIGM and big_m is None:
        big_m = default_big_m(data)
    n = data.n
    # Trivial incumbent: everything flagged, w = 0.
    inc_obj, inc_z, inc_w = lam * n, np.ones(n, dtype=int), np.zeros(data.p)
    counter = itertools.count()
    heap = [(-np.inf, next(counter), {})]
    nodes = 0
    while heap:
        if nodes >= node_limit:
            break
        parent_bound, _, fixed = heapq.heappop(heap)
        if parent_bound >= inc_obj - prune_tol:
            continue
        status, bound, w, z = _node_bound(data, lam, fixed, relaxation, big_m, settings)
        nodes += 1
        if status == "infeasible":
            continue
        if status == "failed":
            log.warning("relaxation failed at node with %d fixings; branching blindly", len(fixed))
            bound, w, z = parent_bound, None, None
        elif bound >= inc_obj - prune_tol:
            continue
        if w is not None:
            cand = _incumbent_from(data, lam, w)
            if cand[0] < inc_obj - 1e-12:
                inc_obj, inc_z, inc_w = cand
        free = [i for i in range(n) if i not in fixed]
        j = free[0] if free else None
        if z is not None and free:
            frac = np.abs(z[free] - 0.5)
            j = free[int(np.argmin(frac))]
        if not free or (z is not None and frac.min() >= 0.5 - FEAS_TOL):
            # Leaf, or integral relaxation: done once the rounded leaf attains the bound.
            leaf_z = np.rint(z).astype(int) if z is not None else np.zeros(n, dtype=int)
            for i, b in fixed.items():
                leaf_z[i] = b
            wl = fixed_z_subproblem(data, leaf_z, strict=relaxation is Relaxation.CONIC_SDP)
            if wl is not None:
                leaf = _objective(wl, leaf_z, lam)
                if leaf < inc_obj - 1e-12:
                    inc_obj, inc_z, inc_w = leaf, leaf_z, wl
                if leaf <= bound + 1e-6 * (1.0 + abs(bound)):
                    continue
            if not free:
                continue
        for bit in (0, 1):
            child = dict(fixed)
            child[j] = bit
            heapq.heappush(heap, (bound, next(counter), child))
    remaining = [b for b, _, _ in heap if b < inc_obj - prune_tol]
    optimal = not remaining
    lower = inc_obj if optimal else min(min(remaining), inc_obj)
    return ExactResult(inc_obj, inc_z, inc_w, nodes, Method.BRANCH_AND_BOUND, optimal, lower)


def relaxation_gap(zeta_mio: float, zeta_relax: float) -> float:
    """Relative shortfall ``(zeta_mio - zeta_relax) / zeta_mio``."""
    if not zeta_mio > 0:
        raise InputError("gap is undefined for a nonpositive exact optimum")
    return (zeta_mio - zeta_relax) / zeta_mio


def bigm_relaxation_value(data: LabeledDataset, lam: float, big_m: Optional[float] = None) -> float:
    return build_bigm_relaxation(data, lam, big_m).solve().objective


def conic_relaxation_value(data: LabeledDataset, lam: float,
                           settings: SolverSettings = SolverSettings(1e-9, 1e-9)) -> float:
    sol = build_conic_sdp(data, SvmHyperparams(Form.CONIC_SDP_PENALTY, lam=lam)).solve(settings)
    return sol.primal_objective
