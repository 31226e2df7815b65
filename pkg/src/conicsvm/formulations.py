"""Builders turning a dataset and hyperparameters into solvable programs.

Margins are written ``u_i = m_i^T v``: for the linear models ``m_i = y_i x_i``
and ``v = w``; for the kernel model ``m_i`` is the ``i``-th column of the
signed Gram matrix and ``v = alpha``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np
import scipy.sparse as sp

from . import conic
from .conic import (
    PSD,
    ConicProgram,
    ConicSolution,
    Nonnegative,
    QPSolution,
    RotatedSecondOrder,
    SolverSettings,
    Zero,
    solve_qp,
    tri_index,
)
from .core import (
    InputError,
    Kernel,
    LabeledDataset,
    SolverError,
    SolverStatus,
    TrainedClassifier,
    gram_matrix,
)


class Form(str, enum.Enum):
    HINGE_QP = "HingeQP"
    BIGM_RELAXATION = "BigMRelaxation"
    CONIC_SDP_PENALTY = "ConicSdpPenalty"
    CONIC_SDP_CARDINALITY = "ConicSdpCardinality"
    KERNEL_CONIC_SDP = "KernelConicSdp"


@dataclass(frozen=True)
class SvmHyperparams:
    """Hyperparameters; only those relevant to ``form`` are required.

    ``KernelConicSdp`` uses ``lam`` when given and ``kappa`` otherwise.
    """

    form: Form = Form.CONIC_SDP_PENALTY
    lam: Optional[float] = None
    kappa: Optional[float] = None
    big_m: Optional[float] = None

    def __post_init__(self):
        form = Form(self.form)
        object.__setattr__(self, "form", form)
        if form in (Form.HINGE_QP, Form.BIGM_RELAXATION, Form.CONIC_SDP_PENALTY):
            if self.lam is None or not self.lam > 0:
                raise InputError(f"{form.value} needs lambda > 0")
        if form is Form.BIGM_RELAXATION and self.big_m is not None and not self.big_m > 0:
            raise InputError("big-M must be positive")
        if form is Form.CONIC_SDP_CARDINALITY:
            if self.kappa is None:
                raise InputError("cardinality form needs kappa")
        if form is Form.KERNEL_CONIC_SDP:
            if self.lam is None and self.kappa is None:
                raise InputError("kernel form needs lambda or kappa")
            if self.lam is not None and not self.lam > 0:
                raise InputError("lambda must be positive")
        if self.kappa is not None and not 0.0 <= self.kappa <= 0.5:
            raise InputError("kappa must lie in [0, 0.5]")

    @property
    def uses_penalty(self) -> bool:
        return self.form is Form.CONIC_SDP_PENALTY or (
            self.form is Form.KERNEL_CONIC_SDP and self.lam is not None)

    def to_dict(self) -> dict:
        return {"form": self.form.value, "lambda": self.lam, "kappa": self.kappa, "big_m": self.big_m}


def default_big_m(data: LabeledDataset) -> float:
    return 1e4 * float(np.linalg.norm(data.features, axis=1).max())


def hinge_lambda_grid(size: int) -> np.ndarray:
    """``lambda = beta / (1 - beta)`` for ``size`` evenly spaced ``beta`` in (0, 1)."""
    beta = np.arange(1, size + 1) / (size + 1.0)
    return beta / (1.0 - beta)


def kappa_grid(size: int) -> np.ndarray:
    return np.linspace(0.0, 0.5, size) if size > 1 else np.array([0.5])


# -- quadratic programs ------------------------------------------------------------

@dataclass(frozen=True)
class QPModel:
    """``min 0.5 x^T H x + g^T x  s.t.  G x <= h`` over ``x = (w, extra)``.

    ``z_scale`` maps the trailing variables to indicator levels (big-M only).
    """

    H: sp.csc_matrix
    g: np.ndarray
    G: sp.csr_matrix
    h: np.ndarray
    num_weights: int
    form: Form
    z_scale: Optional[float] = None

    def solve(self, settings: SolverSettings = conic.QP_SETTINGS) -> QPSolution:
        return solve_qp(self.H, self.g, self.G, self.h, settings=settings)

    def weights(self, sol: QPSolution) -> np.ndarray:
        return sol.x[: self.num_weights]

    def z_values(self, sol: QPSolution) -> Optional[np.ndarray]:
        if self.z_scale is None:
            return None
        return sol.x[self.num_weights:] / self.z_scale


def build_hinge_qp(data: LabeledDataset, lam: float) -> QPModel:
    """``min ||w||^2 + lam * sum xi  s.t.  xi >= 0, xi_i >= 1 - y_i x_i^T w``."""
    if not lam > 0:
        raise InputError("lambda must be positive")
    n, p = data.n, data.p
    H = sp.block_diag([2.0 * sp.identity(p), sp.csc_matrix((n, n))], format="csc")
    g = np.r_[np.zeros(p), np.full(n, float(lam))]
    Z = data.signed_features
    G = sp.vstack([
        sp.hstack([sp.csr_matrix((n, p)), -sp.identity(n)]),
        sp.hstack([-sp.csr_matrix(Z), -sp.identity(n)]),
    ], format="csr")
    h = np.r_[np.zeros(n), -np.ones(n)]
    return QPModel(H, g, G, h, p, Form.HINGE_QP)


def build_bigm_relaxation(data: LabeledDataset, lam: float, big_m: Optional[float] = None,
                          z_lower=None, z_upper=None) -> QPModel:
    """Continuous relaxation ``min ||w||^2 + lam sum z  s.t.  y_i x_i^T w >= 1 - M z_i``,
    ``z_lower <= z <= z_upper`` (defaults 0 and 1).

    The program is posed in ``zeta = M z`` so its conditioning does not
    degrade as ``M`` grows.
    """
    if not lam > 0:
        raise InputError("lambda must be positive")
    M = default_big_m(data) if big_m is None else float(big_m)
    if not M > 0:
        raise InputError("big-M must be positive")
    n, p = data.n, data.p
    lo = np.zeros(n) if z_lower is None else np.asarray(z_lower, dtype=float)
    hi = np.ones(n) if z_upper is None else np.asarray(z_upper, dtype=float)
    H = sp.block_diag([2.0 * sp.identity(p), sp.csc_matrix((n, n))], format="csc")
    g = np.r_[np.zeros(p), np.full(n, lam / M)]
    Z = sp.csr_matrix(data.signed_features)
    I = sp.identity(n)
    G = sp.vstack([
        sp.hstack([-Z, -I]),
        sp.hstack([sp.csr_matrix((n, p)), -I]),
        sp.hstack([sp.csr_matrix((n, p)), I]),
    ], format="csr")
    h = np.r_[-np.ones(n), -M * lo, M * hi]
    return QPModel(H, g, G, h, p, Form.BIGM_RELAXATION, z_scale=M)


# -- conic SDP ------------------------------------------------------------------

@dataclass(frozen=True)
class SdpModel:
    """A conic program plus the locations of its variables and rows.

    ``fixed`` maps point indices to a fixed indicator value in {0, 1}; those
    points carry a linear margin constraint in place of their cones.
    """

    program: ConicProgram
    n: int
    dim: int
    v: slice
    z: slice
    W: slice
    split_pos: slice
    split_neg: slice
    free: np.ndarray
    point_rows: np.ndarray
    psd_rows: slice
    hyper: SvmHyperparams
    fixed: Mapping[int, int] = field(default_factory=dict)
    kernel: Optional[Kernel] = None

    def weights(self, sol: ConicSolution) -> np.ndarray:
        return sol.primal[self.v]

    def z_values(self, sol: ConicSolution) -> np.ndarray:
        return sol.primal[self.z]

    def matrix(self, sol: ConicSolution) -> np.ndarray:
        r, c = tri_index(self.dim)
        M = np.zeros((self.dim, self.dim))
        M[r, c] = sol.primal[self.W]
        M[c, r] = sol.primal[self.W]
        return M

    def solve(self, settings: SolverSettings = SolverSettings()) -> ConicSolution:
        return conic.solve(self.program, settings)


def _assemble_sdp(margins: np.ndarray, objective_matrix: np.ndarray, hyper: SvmHyperparams,
                  fixed: Optional[Mapping[int, int]] = None, kernel: Optional[Kernel] = None) -> SdpModel:
    """Shared SDP over ``(v, z, Wtri, p, q, r, t)``.

    For every free point ``i``: ``p_i - q_i = 1 - m_i^T v``, ``p, q >= 0``,
    ``r_i z_i >= p_i^2``, ``t_i (1 - z_i) >= q_i^2`` and
    ``<m_i m_i^T, W> - 2 m_i^T v + 1 - r_i - t_i >= 0``. Fixed points instead get
    ``m_i^T v >= 1`` (z_i = 0) or ``m_i^T v <= 1`` (z_i = 1). The matrix
    ``[[1, v^T], [v, W]]`` is PSD and the objective is ``<C, W> (+ lam sum z)``.
    """
    fixed = {int(i): int(b) for i, b in (fixed or {}).items()}
    if any(b not in (0, 1) for b in fixed.values()):
        raise InputError("fixed indicator values must be 0 or 1")
    n, d = margins.shape
    free = np.array([i for i in range(n) if i not in fixed], dtype=int)
    nf = free.size
    tr, tc = tri_index(d)
    ntri = tr.size
    offdiag = np.where(tr == tc, 1.0, 2.0)

    # variable layout
    v = slice(0, d)
    z = slice(d, d + n)
    W = slice(z.stop, z.stop + ntri)
    pp = slice(W.stop, W.stop + nf)
    qq = slice(pp.stop, pp.stop + nf)
    rr = slice(qq.stop, qq.stop + nf)
    tt = slice(rr.stop, rr.stop + nf)
    nvar = tt.stop

    c = np.zeros(nvar)
    c[W] = objective_matrix[tr, tc] * offdiag
    if hyper.uses_penalty:
        c[z] = hyper.lam

    blocks_A, blocks_b, cones = [], [], []

    def add(A, b, cone):
        blocks_A.append(sp.csr_matrix(A))
        blocks_b.append(np.asarray(b, dtype=float))
        cones.append(cone)

    F = np.arange(nf)
    Mf = margins[free]
    # zero rows: split identity and fixed indicators (A x + s = b, s = 0)
    A0 = sp.lil_matrix((nf + len(fixed), nvar))
    b0 = np.zeros(nf + len(fixed))
    if nf:
        A0[:nf, v] = Mf
        A0[F, pp.start + F] = 1.0
        A0[F, qq.start + F] = -1.0
        b0[:nf] = 1.0
    for k, (i, bit) in enumerate(sorted(fixed.items())):
        A0[nf + k, z.start + i] = 1.0
        b0[nf + k] = bit
    add(A0, b0, Zero(A0.shape[0]))

    # nonnegative rows; s = b - A x >= 0
    rows, rhs = [], []
    eye_z = sp.csr_matrix((np.ones(n), (np.arange(n), z.start + np.arange(n))), shape=(n, nvar))
    rows += [-eye_z, eye_z]
    rhs += [np.zeros(n), np.ones(n)]
    if nf:
        sel = lambda sl: sp.csr_matrix((np.ones(nf), (F, sl.start + F)), shape=(nf, nvar))
        rows += [-sel(pp), -sel(qq)]
        rhs += [np.zeros(nf), np.zeros(nf)]
        # per-point hull constraint: -( <m m^T, W> - 2 m^T v - r - t ) x <= 1
        P = sp.lil_matrix((nf, nvar))
        P[:, W] = -(Mf[:, tr] * Mf[:, tc]) * offdiag
        P[:, v] = 2.0 * Mf
        P[F, rr.start + F] = 1.0
        P[F, tt.start + F] = 1.0
        point_row0 = sum(r.shape[0] for r in rows) + A0.shape[0]
        rows.append(P)
        rhs.append(np.ones(nf))
    else:
        point_row0 = 0
    for i, bit in sorted(fixed.items()):
        row = sp.lil_matrix((1, nvar))
        sign = -1.0 if bit == 0 else 1.0
        row[0, v] = sign * margins[i]
        rows.append(row)
        rhs.append(np.array([sign * 1.0]))
    if not hyper.uses_penalty:
        card = sp.csr_matrix((np.ones(n), (np.zeros(n, int), z.start + np.arange(n))), shape=(1, nvar))
        rows.append(card)
        rhs.append(np.array([hyper.kappa * n]))
    add(sp.vstack(rows, format="csr"), np.concatenate(rhs), Nonnegative(sum(r.shape[0] for r in rows)))

    # rotated cones (r_i, z_i / 2, p_i) and (t_i, (1 - z_i) / 2, q_i): 2 * a * b >= c^2
    if nf:
        base = 6 * F
        rows_ = np.concatenate([base, base + 1, base + 2, base + 3, base + 4, base + 5])
        cols_ = np.concatenate([rr.start + F, z.start + free, pp.start + F,
                                tt.start + F, z.start + free, qq.start + F])
        vals_ = np.concatenate([np.full(nf, -1.0), np.full(nf, -0.5), np.full(nf, -1.0),
                                np.full(nf, -1.0), np.full(nf, 0.5), np.full(nf, -1.0)])
        Rot = sp.csr_matrix((vals_, (rows_, cols_)), shape=(6 * nf, nvar))
        brot = np.zeros(6 * nf)
        brot[base + 4] = 0.5
        blocks_A.append(Rot)
        blocks_b.append(brot)
        cones.extend([RotatedSecondOrder(3)] * (2 * nf))

    # PSD block [[1, v^T], [v, W]] in scaled lower-triangular order
    br, bc = tri_index(d + 1)
    nb = br.size
    Apsd = sp.lil_matrix((nb, nvar))
    bpsd = np.zeros(nb)
    wpos = {(int(a), int(b)): k for k, (a, b) in enumerate(zip(tr, tc))}
    for k, (a, b) in enumerate(zip(br, bc)):
        scale = 1.0 if a == b else np.sqrt(2.0)
        if a == 0 and b == 0:
            bpsd[k] = 1.0
        elif b == 0:
            Apsd[k, v.start + a - 1] = -scale
        else:
            Apsd[k, W.start + wpos[(a - 1, b - 1)]] = -scale
    add(Apsd, bpsd, PSD(d + 1))

    A = sp.vstack(blocks_A, format="csc")
    b = np.concatenate(blocks_b)
    program = ConicProgram(c, A, b, tuple(cones))
    psd_start = A.shape[0] - nb
    return SdpModel(
        program=program, n=n, dim=d, v=v, z=z, W=W, split_pos=pp, split_neg=qq,
        free=free, point_rows=point_row0 + F, psd_rows=slice(psd_start, A.shape[0]),
        hyper=hyper, fixed=fixed, kernel=kernel)


def _conic_hyper(hyper) -> SvmHyperparams:
    if hyper.form not in (Form.CONIC_SDP_PENALTY, Form.CONIC_SDP_CARDINALITY):
        raise InputError(f"build_conic_sdp cannot build form {hyper.form.value}")
    return hyper


def build_conic_sdp(data: LabeledDataset, hyper: SvmHyperparams,
                    fixed: Optional[Mapping[int, int]] = None) -> SdpModel:
    """Conic-loss training SDP over ``(w, z, W)`` with ``[[1, w^T], [w, W]]`` PSD.

    The objective is ``trace(W) + lam sum z`` (penalty form) or ``trace(W)``
    with ``sum z <= kappa n`` (cardinality form).
    """
    hyper = _conic_hyper(hyper)
    return _assemble_sdp(data.signed_features, np.eye(data.p), hyper, fixed)


def build_kernel_sdp(data: LabeledDataset, kernel: Kernel, hyper: SvmHyperparams,
                     fixed: Optional[Mapping[int, int]] = None, psd_tol: float = 1e-8) -> SdpModel:
    """Kernel counterpart of :func:`build_conic_sdp` over ``(alpha, z, A)``
    with objective ``<K, A> (+ lam sum z)`` and margins ``K_i^T alpha``."""
    if hyper.form is not Form.KERNEL_CONIC_SDP:
        raise InputError("build_kernel_sdp needs the KernelConicSdp form")
    K = gram_matrix(kernel, data)
    eig_min = np.linalg.eigvalsh(K).min()
    if eig_min < -psd_tol * max(1.0, np.abs(K).max()):
        raise InputError(f"Gram matrix is not PSD (min eigenvalue {eig_min:.3g})")
    return _assemble_sdp(K, K, hyper, fixed, kernel=kernel)


def recover_gamma(model: SdpModel, solution: ConicSolution) -> np.ndarray:
    """Per-point multipliers of the hull constraints, i.e. the loss
    parameters ``gamma`` selected by the SDP. Fixed points get 0."""
    if not solution.optimal:
        raise SolverError(f"cannot recover gamma from a {solution.status.value} solution")
    gamma = np.zeros(model.n)
    gamma[model.free] = solution.dual[model.point_rows]
    return gamma


# -- training wrappers ---------------------------------------------------------------

_STATUS_MAP = {
    conic.ConicStatus.OPTIMAL: SolverStatus.OPTIMAL,
    conic.ConicStatus.INACCURATE: SolverStatus.INACCURATE,
    conic.ConicStatus.PRIMAL_INFEASIBLE: SolverStatus.INFEASIBLE,
    conic.ConicStatus.DUAL_INFEASIBLE: SolverStatus.UNBOUNDED,
    conic.ConicStatus.ITERATION_LIMIT: SolverStatus.ITERATION_LIMIT,
}


def _check(status, what):
    if status not in (conic.ConicStatus.OPTIMAL, conic.ConicStatus.INACCURATE):
        raise SolverError(f"{what}: solver returned {status.value}")


def train_hinge(data: LabeledDataset, lam: float) -> TrainedClassifier:
    model = build_hinge_qp(data, lam)
    sol = model.solve()
    _check(sol.status, "hinge QP")
    return TrainedClassifier(
        weights=model.weights(sol), objective_value=sol.objective,
        solver_status=_STATUS_MAP[sol.status], method="hinge", hyperparameters={"lambda": lam})


def train_bigm(data: LabeledDataset, lam: float, big_m: Optional[float] = None) -> TrainedClassifier:
    model = build_bigm_relaxation(data, lam, big_m)
    sol = model.solve()
    _check(sol.status, "big-M relaxation")
    return TrainedClassifier(
        weights=model.weights(sol), objective_value=sol.objective,
        solver_status=_STATUS_MAP[sol.status], z_values=np.clip(model.z_values(sol), 0.0, 1.0),
        method="bigm", hyperparameters={"lambda": lam, "big_m": model.z_scale})


def train_conic(data: LabeledDataset, lam: Optional[float] = None, kappa: Optional[float] = None,
                settings: SolverSettings = SolverSettings()) -> TrainedClassifier:
    """Train with the conic loss; pass ``lam`` (penalty form) or ``kappa``
    (cardinality form)."""
    if (lam is None) == (kappa is None):
        raise InputError("give exactly one of lam / kappa")
    form = Form.CONIC_SDP_PENALTY if lam is not None else Form.CONIC_SDP_CARDINALITY
    model = build_conic_sdp(data, SvmHyperparams(form, lam=lam, kappa=kappa))
    sol = model.solve(settings)
    _check(sol.status, "conic SDP")
    return TrainedClassifier(
        weights=model.weights(sol), objective_value=sol.primal_objective,
        solver_status=_STATUS_MAP[sol.status], z_values=np.clip(model.z_values(sol), 0.0, 1.0),
        method="conic", hyperparameters=model.hyper.to_dict())


def train_kernel_conic(data: LabeledDataset, kernel: Kernel, lam: Optional[float] = None,
                       kappa: Optional[float] = None,
                       settings: SolverSettings = SolverSettings()) -> TrainedClassifier:
    if (lam is None) == (kappa is None):
        raise InputError("give exactly one of lam / kappa")
    model = build_kernel_sdp(data, kernel, SvmHyperparams(Form.KERNEL_CONIC_SDP, lam=lam, kappa=kappa))
    sol = model.solve(settings)
    _check(sol.status, "kernel SDP")
    return TrainedClassifier(
        dual_coefficients=model.weights(sol), kernel=kernel, training_data=data,
        objective_value=sol.primal_objective, solver_status=_STATUS_MAP[sol.status],
        z_values=np.clip(model.z_values(sol), 0.0, 1.0), method="conic-kernel",
        hyperparameters=model.hyper.to_dict())
