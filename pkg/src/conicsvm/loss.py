"""Closed-form losses and convex-hull primitives for the 0-1 loss set.

All scalar functions accept numpy arrays and broadcast.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .core import InputError

PSD_TOL = -1e-9


@dataclass(frozen=True)
class ConicLossParams:
    gamma: float
    lam: float

    def __post_init__(self):
        if not (self.gamma > 0 and self.lam > 0):
            raise InputError("conic loss needs gamma > 0 and lambda > 0")

    @property
    def breakpoint(self) -> float:
        """Value of ``1 - u`` beyond which the loss is flat at lambda."""
        return float(np.sqrt(self.lam / self.gamma))


def pos(a):
    return np.maximum(a, 0.0)


def neg(a):
    return np.maximum(-a, 0.0)


def sq_over(a, d):
    """``a**2 / d`` with ``a**2/0 = 0`` if ``a == 0`` and ``+inf`` otherwise."""
    a = np.asarray(a, dtype=float)
    d = np.asarray(d, dtype=float)
    a, d = np.broadcast_arrays(a, d)
    out = np.empty(a.shape)
    zero = d == 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out[~zero] = a[~zero] ** 2 / d[~zero]
    out[zero] = np.where(a[zero] == 0, 0.0, np.inf)
    return out[()] if out.ndim == 0 else out


def hinge_loss(u):
    return pos(1.0 - np.asarray(u, dtype=float))


def zero_one_loss(u):
    """Margin 0-1 loss: 1 when ``u < 1`` (inside the margin or misclassified)."""
    return np.where(np.asarray(u, dtype=float) < 1.0, 1.0, 0.0)[()]


def conic_loss(u, params: ConicLossParams):
    s = 1.0 - np.asarray(u, dtype=float)
    g, lam = params.gamma, params.lam
    mid = 2.0 * np.sqrt(lam * g) * s - g * s**2
    out = np.where(s <= 0, 0.0, np.where(s <= params.breakpoint, mid, lam))
    return out[()]


def conic_loss_argmin_z(u, params: ConicLossParams):
    """Minimizing indicator level ``z`` in the projection defining the loss."""
    s = 1.0 - np.asarray(u, dtype=float)
    z = np.minimum(np.sqrt(params.gamma / params.lam) * s, 1.0)
    return np.where(s <= 0, 0.0, z)[()]


def strengthening_h(u, z):
    """``(1-u)_+^2/z + (1-u)_-^2/(1-z) - (1-u)^2``, possibly ``+inf``."""
    r = 1.0 - np.asarray(u, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any((z < 0) | (z > 1)):
        raise InputError("z must lie in [0, 1]")
    return sq_over(pos(r), z) + sq_over(neg(r), 1.0 - z) - r**2


def gamma_max_single(Q, x) -> float:
    """Largest ``gamma`` with ``Q - gamma x x^T`` PSD, i.e. ``1 / (x^T Q^{-1} x)``."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    x = np.asarray(x, dtype=float).ravel()
    if Q.shape != (x.size, x.size):
        raise InputError("Q and x have incompatible shapes")
    if not np.any(x):
        raise InputError("x = 0 leaves gamma unbounded")
    try:
        factor = cho_factor(0.5 * (Q + Q.T))
    except LinAlgError:
        raise InputError("Q must be positive definite") from None
    return float(1.0 / (x @ cho_solve(factor, x)))


def hull_inequality_rhs(w, z, x, y, Q, gamma) -> float:
    """Right-hand side of the hull inequality for the single-point set with
    quadratic form ``Q`` (a lower bound on ``t``)."""
    w = np.asarray(w, dtype=float)
    r = 1.0 - y * float(np.dot(x, w))
    quad = float(w @ np.asarray(Q, dtype=float) @ w)
    return float(quad - gamma * r**2 + gamma * sq_over(pos(r), z) + gamma * sq_over(neg(r), 1.0 - z))


def scalar_hull_rhs(w, z, b):
    """Hull bound for the scalar set ``{t >= w^2, z in {0,1}, z=0 => w >= b,
    z=1 => w <= b}``: ``(w-b)_+^2/(1-z) + (w-b)_-^2/z + 2bw - b^2``."""
    w = np.asarray(w, dtype=float)
    d = w - b
    return sq_over(pos(d), 1.0 - np.asarray(z)) + sq_over(neg(d), z) + 2.0 * b * w - b * b


def is_psd(M, tol: float = PSD_TOL) -> bool:
    M = np.asarray(M, dtype=float)
    return bool(np.linalg.eigvalsh(0.5 * (M + M.T)).min() >= tol)
