"""Independent numerical ground truth: finite differences and plain matrix
functionals.  Nothing here imports the analytic derivative code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError, ShapeError


@dataclass(frozen=True)
class FDConfig:
    h_grad: float = 1e-6
    h_hess: float = 1e-4

    def __post_init__(self):
        if not (self.h_grad > 0 and self.h_hess > 0):
            raise DomainError("finite-difference steps must be positive")


def _call(lossfn, theta, d):
    val = float(lossfn(theta))
    if not math.isfinite(val):
        raise NumericError(f"loss is non-finite near coordinate {d}", stage=f"coordinate {d}")
    return val


def fd_gradient(lossfn, theta, cfg: FDConfig = FDConfig()) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    h = cfg.h_grad
    g = np.empty_like(theta)
    for d in range(theta.shape[0]):
        tp = theta.copy()
        tm = theta.copy()
        tp[d] += h
        tm[d] -= h
        g[d] = (_call(lossfn, tp, d) - _call(lossfn, tm, d)) / (2.0 * h)
    return g


def fd_hessian_raw(lossfn, theta, cfg: FDConfig = FDConfig()) -> np.ndarray:
    """Central-difference Hessian before symmetrisation.

    Off-diagonal (a, b) uses the four-point stencil with ``+-h e_a`` applied
    first; the diagonal uses the three-point second difference.
    """
    theta = np.asarray(theta, dtype=np.float64)
    D = theta.shape[0]
    h = cfg.h_hess
    H = np.empty((D, D))
    l0 = _call(lossfn, theta, -1)

    def at(shifts):
        t = theta.copy()
        for idx, s in shifts:
            t[idx] += s
        return _call(lossfn, t, shifts[0][0])

    for a in range(D):
        H[a, a] = (at([(a, h)]) - 2.0 * l0 + at([(a, -h)])) / (h * h)
        for b in range(D):
            if b == a:
                continue
            H[a, b] = (
                at([(a, h), (b, h)])
                - at([(a, h), (b, -h)])
                - at([(a, -h), (b, h)])
                + at([(a, -h), (b, -h)])
            ) / (4.0 * h * h)
    return H


def fd_hessian(lossfn, theta, cfg: FDConfig = FDConfig()) -> np.ndarray:
    H = fd_hessian_raw(lossfn, theta, cfg)
    return 0.5 * (H + H.T)


def _square(A) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {A.shape}")
    return A


def matrix_trace(A) -> float:
    A = _square(A)
    total = 0.0
    for d in range(A.shape[0]):
        total += float(A[d, d])
    return total


def matrix_sq_trace(A) -> float:
    """``tr(A A)`` as ``sum_ab A[a,b] A[b,a]`` without forming the product."""
    A = _square(A)
    n = A.shape[0]
    total = 0.0
    for a in range(n):
        for b in range(n):
            total += float(A[a, b]) * float(A[b, a])
    return total


def frobenius_diff(A, B) -> float:
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape:
        raise ShapeError(f"shape mismatch {A.shape} vs {B.shape}")
    total = 0.0
    for v in (A - B).ravel():
        total += float(v) * float(v)
    return math.sqrt(total)
