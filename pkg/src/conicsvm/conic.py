"""Standard-form conic programs and their numerical solution.

A program is ``min c^T x + offset  s.t.  A x + s = b,  s in K`` where ``K`` is
an ordered product of zero, nonnegative, second-order, rotated second-order
and PSD cones. Solves run on the Clarabel interior-point solver; rotated
cones are mapped onto second-order cones by an orthogonal row transform, and
PSD blocks use the same scaled triangular layout Clarabel expects.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import clarabel
import numpy as np
import scipy.sparse as sp

from .core import InputError, SolverError

SQRT2 = np.sqrt(2.0)


# -- cones --------------------------------------------------------------------

@dataclass(frozen=True)
class Zero:
    dim: int

    @property
    def size(self) -> int:
        return self.dim


@dataclass(frozen=True)
class Nonnegative:
    dim: int

    @property
    def size(self) -> int:
        return self.dim


@dataclass(frozen=True)
class SecondOrder:
    """``{(t, x): t >= ||x||}``."""

    dim: int

    @property
    def size(self) -> int:
        return self.dim


@dataclass(frozen=True)
class RotatedSecondOrder:
    """``{(u, v, x): 2 u v >= ||x||^2, u, v >= 0}``."""

    dim: int

    @property
    def size(self) -> int:
        return self.dim


@dataclass(frozen=True)
class PSD:
    """Symmetric PSD matrices of the given order, stored by :func:`psd_vectorize`."""

    order: int

    @property
    def size(self) -> int:
        return self.order * (self.order + 1) // 2


Cone = (Zero, Nonnegative, SecondOrder, RotatedSecondOrder, PSD)
_CONE_NAMES = {c.__name__: c for c in Cone}


# -- PSD vectorization ------------------------------------------------------------

def tri_index(k: int):
    """Row/column indices of the lower triangle of a ``k x k`` matrix, in
    storage order ``(0,0), (1,0), (1,1), (2,0), ...``."""
    rows, cols = [], []
    for i in range(k):
        for j in range(i + 1):
            rows.append(i)
            cols.append(j)
    return np.array(rows), np.array(cols)


def tri_position(i: int, j: int) -> int:
    """Position of entry ``(i, j)`` (either order) in a vectorized PSD block."""
    if i < j:
        i, j = j, i
    return i * (i + 1) // 2 + j


def psd_vectorize(M) -> np.ndarray:
    """Scaled lower-triangular vectorization with off-diagonals times sqrt(2),
    so that ``<M, N> = vec(M) . vec(N)``."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InputError("psd_vectorize needs a square matrix")
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(M), initial=0.0)):
        raise InputError("matrix is not symmetric")
    r, c = tri_index(M.shape[0])
    return np.where(r == c, 1.0, SQRT2) * M[r, c]


def psd_devectorize(v) -> np.ndarray:
    v = np.asarray(v, dtype=float).ravel()
    k = int(round((np.sqrt(8 * v.size + 1) - 1) / 2))
    if k * (k + 1) // 2 != v.size:
        raise InputError(f"length {v.size} is not a triangular number")
    r, c = tri_index(k)
    vals = np.where(r == c, v, v / SQRT2)
    M = np.zeros((k, k))
    M[r, c] = vals
    M[c, r] = vals
    return M


# -- program / solution ---------------------------------------------------------

class ConicStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INACCURATE = "Inaccurate"
    PRIMAL_INFEASIBLE = "PrimalInfeasible"
    DUAL_INFEASIBLE = "DualInfeasible"
    ITERATION_LIMIT = "IterationLimit"


@dataclass(frozen=True)
class ConicProgram:
    objective: np.ndarray
    constraint_matrix: sp.csc_matrix
    rhs: np.ndarray
    cones: tuple
    variable_names: Optional[tuple] = None
    offset: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).ravel()
        b = np.asarray(self.rhs, dtype=float).ravel()
        A = sp.csc_matrix(self.constraint_matrix, dtype=float)
        cones = tuple(self.cones)
        for k in cones:
            if not isinstance(k, Cone) or k.size < 0:
                raise InputError(f"unknown cone descriptor {k!r}")
            if isinstance(k, (SecondOrder,)) and k.dim < 1:
                raise InputError("second-order cone needs dim >= 1")
            if isinstance(k, RotatedSecondOrder) and k.dim < 2:
                raise InputError("rotated second-order cone needs dim >= 2")
        m = sum(k.size for k in cones)
        if A.shape != (m, c.size) or b.size != m:
            raise InputError(
                f"dimension mismatch: cones give {m} rows, A is {A.shape}, "
                f"b has {b.size}, c has {c.size}")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(b)) and np.all(np.isfinite(A.data))):
            raise InputError("program data must be finite")
        if self.variable_names is not None and len(self.variable_names) != c.size:
            raise InputError("variable_names length differs from variable count")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "rhs", b)
        object.__setattr__(self, "constraint_matrix", A)
        object.__setattr__(self, "cones", cones)

    @property
    def num_vars(self) -> int:
        return self.objective.size

    @property
    def num_rows(self) -> int:
        return self.rhs.size

    def cone_slices(self):
        start = 0
        for k in self.cones:
            yield k, slice(start, start + k.size)
            start += k.size


@dataclass(frozen=True)
class SolverSettings:
    tol_gap: float = 1e-7
    tol_feas: float = 1e-7
    max_iters: int = 50000


@dataclass(frozen=True)
class ConicSolution:
    primal: np.ndarray
    dual: np.ndarray
    slacks: np.ndarray
    status: ConicStatus
    primal_objective: float
    dual_objective: float
    iterations: int
    solve_time: float

    @property
    def optimal(self) -> bool:
        return self.status is ConicStatus.OPTIMAL


# -- solving ----------------------------------------------------------------------

def _rotation(dim: int) -> sp.csr_matrix:
    """Symmetric orthogonal map from a rotated cone block onto a second-order
    block: ``(u, v, x) -> ((u+v)/sqrt2, (u-v)/sqrt2, x)``."""
    T = sp.identity(dim, format="lil")
    T[0, 0] = T[0, 1] = T[1, 0] = 1.0 / SQRT2
    T[1, 1] = -1.0 / SQRT2
    return T.tocsr()


def _solver_form(program: ConicProgram):
    """Return (A, b, cones, T) with rotated cones replaced by second-order
    cones; ``T`` is the (symmetric, orthogonal) row transform used."""
    m = program.num_rows
    blocks, cones = [], []
    for k, sl in program.cone_slices():
        if not k.size:
            continue
        if isinstance(k, RotatedSecondOrder):
            blocks.append(_rotation(k.dim))
            cones.append(clarabel.SecondOrderConeT(k.dim))
        else:
            blocks.append(sp.identity(k.size, format="csr"))
            cones.append({
                Zero: lambda c: clarabel.ZeroConeT(c.dim),
                Nonnegative: lambda c: clarabel.NonnegativeConeT(c.dim),
                SecondOrder: lambda c: clarabel.SecondOrderConeT(c.dim),
                PSD: lambda c: clarabel.PSDTriangleConeT(c.order),
            }[type(k)](k))
    T = sp.block_diag(blocks, format="csc") if blocks else sp.csc_matrix((m, m))
    return sp.csc_matrix(T @ program.constraint_matrix), T @ program.rhs, cones, T


def _settings(settings: SolverSettings):
    # Clarabel measures its criteria on the equilibrated problem; solving to a
    # tenth of the requested tolerances lets the result pass the unscaled
    # checks in _certify.
    s = clarabel.DefaultSettings()
    s.verbose = False
    s.max_threads = 1
    s.max_iter = int(settings.max_iters)
    s.tol_gap_abs = 0.1 * settings.tol_gap
    s.tol_gap_rel = 0.1 * settings.tol_gap
    s.tol_feas = 0.1 * settings.tol_feas
    s.tol_ktratio = min(s.tol_ktratio, settings.tol_gap)
    return s


_STATUS = {
    "Solved": ConicStatus.OPTIMAL,
    "AlmostSolved": ConicStatus.INACCURATE,
    "PrimalInfeasible": ConicStatus.PRIMAL_INFEASIBLE,
    "AlmostPrimalInfeasible": ConicStatus.PRIMAL_INFEASIBLE,
    "DualInfeasible": ConicStatus.DUAL_INFEASIBLE,
    "AlmostDualInfeasible": ConicStatus.DUAL_INFEASIBLE,
    "MaxIterations": ConicStatus.ITERATION_LIMIT,
    "MaxTime": ConicStatus.ITERATION_LIMIT,
}


def _run(P, q, A, b, cones, settings: SolverSettings):
    t0 = time.perf_counter()
    solver = clarabel.DefaultSolver(sp.csc_matrix(P), q, A, b, cones, _settings(settings))
    sol = solver.solve()
    return sol, time.perf_counter() - t0


def solve(program: ConicProgram, settings: SolverSettings = SolverSettings()) -> ConicSolution:
    """Solve a conic program.

    ``Optimal`` is reported exactly when the returned point passes the gap,
    residual and cone-membership checks at the requested tolerances.
    ``Inaccurate`` means they hold only at 1000x the tolerances; anything
    worse is a numerical breakdown and reported as ``IterationLimit``.
    """
    A, b, cones, T = _solver_form(program)
    n = program.num_vars
    sol, elapsed = _run(sp.csc_matrix((n, n)), program.objective, A, b, cones, settings)
    status = _STATUS.get(str(sol.status), ConicStatus.INACCURATE)
    x = np.asarray(sol.x, dtype=float)
    # T is symmetric and orthogonal, so it maps slacks and duals back as well.
    s = T @ np.asarray(sol.s, dtype=float)
    y = T @ np.asarray(sol.z, dtype=float)
    pobj = float(program.objective @ x) + program.offset
    dobj = float(-program.rhs @ y) + program.offset
    if status in (ConicStatus.OPTIMAL, ConicStatus.INACCURATE):
        if _certify(program, x, s, pobj, dobj, settings):
            status = ConicStatus.OPTIMAL
        elif _certify(program, x, s, pobj, dobj, _loose(settings)):
            status = ConicStatus.INACCURATE
        else:
            status = ConicStatus.ITERATION_LIMIT
    return ConicSolution(x, y, s, status, pobj, dobj, int(sol.iterations), elapsed)


def _loose(settings: SolverSettings) -> SolverSettings:
    return SolverSettings(1e3 * settings.tol_gap, 1e3 * settings.tol_feas, settings.max_iters)


def _certify(program, x, s, pobj, dobj, settings) -> bool:
    res = program.constraint_matrix @ x + s - program.rhs
    if np.linalg.norm(res) > settings.tol_feas * (1.0 + np.linalg.norm(program.rhs)):
        return False
    if abs(pobj - dobj) > settings.tol_gap * (1.0 + abs(pobj)):
        return False
    return cone_violation(program.cones, s) <= settings.tol_feas * (1.0 + np.abs(s).max(initial=0.0))


def cone_violation(cones: Sequence, s) -> float:
    """Largest amount by which ``s`` leaves the cone product (0 if inside)."""
    s = np.asarray(s, dtype=float)
    worst, start = 0.0, 0
    for k in cones:
        v = s[start:start + k.size]
        start += k.size
        if not k.size:
            continue
        if isinstance(k, Zero):
            viol = np.abs(v).max()
        elif isinstance(k, Nonnegative):
            viol = max(0.0, -v.min())
        elif isinstance(k, SecondOrder):
            viol = max(0.0, np.linalg.norm(v[1:]) - v[0])
        elif isinstance(k, RotatedSecondOrder):
            u, w = v[0], v[1]
            viol = max(0.0, -u, -w, np.linalg.norm(np.r_[(u - w) / SQRT2, v[2:]]) - (u + w) / SQRT2)
        else:
            viol = max(0.0, -np.linalg.eigvalsh(psd_devectorize(v)).min())
        worst = max(worst, float(viol))
    return worst


# -- dense convex QP --------------------------------------------------------------

class InfeasibleError(SolverError):
    """The constraint system of a QP has no solution."""


@dataclass(frozen=True)
class QPSolution:
    x: np.ndarray
    objective: float
    status: ConicStatus
    ineq_duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    eq_duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    solve_time: float = 0.0


QP_SETTINGS = SolverSettings(tol_gap=1e-9, tol_feas=1e-9, max_iters=500)


def solve_qp(H, g, G=None, h=None, A=None, b=None, settings: SolverSettings = QP_SETTINGS,
             raise_on_infeasible: bool = True) -> QPSolution:
    """Minimize ``0.5 x^T H x + g^T x`` subject to ``G x <= h`` and ``A x = b``.

    Raises
    ------
    InfeasibleError
        When the constraints are infeasible (unless ``raise_on_infeasible`` is
        off, in which case the status says so).
    """
    g = np.asarray(g, dtype=float).ravel()
    n = g.size
    H = sp.csc_matrix(H, dtype=float) if H is not None else sp.csc_matrix((n, n))
    if H.shape != (n, n):
        raise InputError("H and g have incompatible shapes")
    rows, rhs, cones = [], [], []
    if A is not None and np.size(b):
        A = sp.csr_matrix(np.atleast_2d(A) if not sp.issparse(A) else A, dtype=float)
        rows.append(A)
        rhs.append(np.asarray(b, dtype=float).ravel())
        cones.append(clarabel.ZeroConeT(A.shape[0]))
    if G is not None and np.size(h):
        G = sp.csr_matrix(np.atleast_2d(G) if not sp.issparse(G) else G, dtype=float)
        rows.append(G)
        rhs.append(np.asarray(h, dtype=float).ravel())
        cones.append(clarabel.NonnegativeConeT(G.shape[0]))
    M = sp.vstack(rows, format="csc") if rows else sp.csc_matrix((0, n))
    bb = np.concatenate(rhs) if rhs else np.zeros(0)
    if M.shape[1] != n:
        raise InputError("constraint matrix has wrong column count")
    sol, elapsed = _run(sp.triu(H, format="csc"), g, M, bb, cones, settings)
    status = _STATUS.get(str(sol.status), ConicStatus.INACCURATE)
    if status is ConicStatus.PRIMAL_INFEASIBLE and raise_on_infeasible:
        raise InfeasibleError("QP constraints are infeasible")
    x = np.asarray(sol.x, dtype=float)
    duals = np.asarray(sol.z, dtype=float)
    n_eq = A.shape[0] if (A is not None and np.size(b)) else 0
    obj = float(0.5 * x @ (H @ x) + g @ x)
    return QPSolution(x, obj, status, duals[n_eq:], duals[:n_eq], elapsed)


# -- plain-text dump ----------------------------------------------------------------

def write_dump(program: ConicProgram, path) -> None:
    """Write ``program`` as text: a header, cone list, then one ``c``/``b``
    entry or ``A`` triplet per line."""
    A = program.constraint_matrix.tocoo()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# conic program: min c'x + offset s.t. Ax + s = b, s in K\n")
        fh.write(f"dims {program.num_rows} {program.num_vars}\n")
        fh.write(f"offset {float(program.offset)!r}\n")
        for k in program.cones:
            arg = k.order if isinstance(k, PSD) else k.dim
            fh.write(f"cone {type(k).__name__} {arg}\n")
        for j, v in enumerate(program.objective):
            if v:
                fh.write(f"c {j} {float(v)!r}\n")
        for i, v in enumerate(program.rhs):
            if v:
                fh.write(f"b {i} {float(v)!r}\n")
        for i, j, v in sorted(zip(A.row.tolist(), A.col.tolist(), A.data.tolist())):
            fh.write(f"A {i} {j} {v!r}\n")


def read_dump(path) -> ConicProgram:
    cones, ci, bi, ai, aj, av = [], {}, {}, [], [], []
    m = n = 0
    offset = 0.0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            tok = line.split()
            if not tok or tok[0].startswith("#"):
                continue
            if tok[0] == "dims":
                m, n = int(tok[1]), int(tok[2])
            elif tok[0] == "offset":
                offset = float(tok[1])
            elif tok[0] == "cone":
                cones.append(_CONE_NAMES[tok[1]](int(tok[2])))
            elif tok[0] == "c":
                ci[int(tok[1])] = float(tok[2])
            elif tok[0] == "b":
                bi[int(tok[1])] = float(tok[2])
            elif tok[0] == "A":
                ai.append(int(tok[1]))
                aj.append(int(tok[2]))
                av.append(float(tok[3]))
            else:
                raise InputError(f"unrecognized line: {line.strip()}")
    c = np.zeros(n)
    c[list(ci)] = list(ci.values())
    b = np.zeros(m)
    b[list(bi)] = list(bi.values())
    A = sp.csc_matrix((av, (ai, aj)), shape=(m, n))
    return ConicProgram(c, A, b, tuple(cones), offset=offset)
