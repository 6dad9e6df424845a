"""Upper bound on the largest Hessian eigenvalue from its first two spectral
moments, and the numeric spectrum it is checked against.

For a symmetric ``D x D`` matrix with mean eigenvalue ``mu = tr/D`` and
eigenvalue variance ``sigma^2 = tr(H^2)/D - mu^2``::

    lambda_1 <= lambda_sup = mu + sqrt(D - 1) * sigma

with equality when exactly one eigenvalue is nonzero.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, NumericError
from .hessian import HessianBundle
from .network import BatchTrace, NetworkParams
from .oracle import matrix_sq_trace, matrix_trace
from .traces import TraceBundle, bilinear_components, trace_closed_form, trace_sq_closed_form

SYMMETRY_TOL = 1e-12
CLAMP_RTOL = 1e-8


def jacobi_eigh(A, tol: float = 1e-12, max_sweeps: int = 100, vectors: bool = False):
    """Cyclic Jacobi eigensolver for a dense symmetric matrix.

    Sweeps until the off-diagonal Frobenius norm falls below
    ``tol * ||A||_F``.  Returns eigenvalues sorted descending and, if
    ``vectors`` is set, the matching eigenvectors as columns.
    """
    A = np.array(A, dtype=np.float64)
    n = A.shape[0]
    U = np.eye(n)
    norm = float(np.linalg.norm(A))
    if n > 1 and norm > 0.0:
        for _ in range(max_sweeps):
            off = math.sqrt(2.0 * float(np.sum(np.triu(A, 1) ** 2)))
            if off < tol * norm:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = A[p, q]
                    if apq == 0.0:
                        continue
                    theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                    if abs(theta) > 1e150:
                        t = 0.5 / theta
                    else:
                        t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    c = 1.0 / math.sqrt(t * t + 1.0)
                    s = t * c
                    col_p = A[:, p].copy()
                    col_q = A[:, q]
                    A[:, p] = c * col_p - s * col_q
                    A[:, q] = s * col_p + c * col_q
                    row_p = A[p, :].copy()
                    row_q = A[q, :]
                    A[p, :] = c * row_p - s * row_q
                    A[q, :] = s * row_p + c * row_q
                    A[p, q] = A[q, p] = 0.0
                    u_p = U[:, p].copy()
                    U[:, p] = c * u_p - s * U[:, q]
                    U[:, q] = s * u_p + c * U[:, q]
        else:
            raise NumericError(f"Jacobi did not converge in {max_sweeps} sweeps", stage="eigensolver")
    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    if vectors:
        return w[order], U[:, order]
    return w[order]


def lambda_sup_closed_form(tr_total: float, tr_sq_total: float, D: int):
    """Return ``(mu, sigma2, lambda_sup)``.

    Negative variance from round-off is clamped to zero; a negative part
    larger than ``1e-8`` of the second moment raises :class:`NumericError`.
    """
    if int(D) != D or D < 1:
        raise DomainError(f"D must be a positive integer, got {D}")
    if tr_sq_total < 0:
        raise DomainError(f"tr(H^2) must be nonnegative, got {tr_sq_total}")
    mu = tr_total / D
    second = tr_sq_total / D
    sigma2 = second - mu * mu
    if sigma2 < 0.0:
        if -sigma2 > CLAMP_RTOL * max(second, mu * mu):
            raise NumericError(
                f"eigenvalue variance {sigma2:.3e} is too negative to be round-off", stage="variance"
            )
        sigma2 = 0.0
    return mu, sigma2, mu + math.sqrt(D - 1) * math.sqrt(sigma2)


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    lambda1: float
    mu: float
    sigma2: float
    lambda_sup: float
    psd: bool

    def to_json(self) -> dict:
        return {
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "lambda1": float(self.lambda1),
            "mu": float(self.mu),
            "sigma2": float(self.sigma2),
            "lambda_sup": float(self.lambda_sup),
            "psd": bool(self.psd),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SpectrumReport":
        return cls(
            eigenvalues=np.array(obj["eigenvalues"], dtype=np.float64),
            lambda1=obj["lambda1"],
            mu=obj["mu"],
            sigma2=obj["sigma2"],
            lambda_sup=obj["lambda_sup"],
            psd=obj["psd"],
        )


def spectrum_report(hessian, traces: TraceBundle | None = None) -> SpectrumReport:
    """Numeric eigenvalues plus the closed-form bound.

    ``hessian`` is a :class:`HessianBundle` or a symmetric matrix.  When
    ``traces`` is omitted the two traces are taken from the matrix itself.
    """
    H = hessian.assembled if isinstance(hessian, HessianBundle) else np.asarray(hessian, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {H.shape}")
    asym = float(np.max(np.abs(H - H.T))) if H.size else 0.0
    if asym > SYMMETRY_TOL:
        raise DomainError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    D = H.shape[0]
    if traces is None:
        tr, tr_sq = matrix_trace(H), matrix_sq_trace(H)
    else:
        tr, tr_sq = traces.tr_total, traces.tr_sq_total
    mu, sigma2, lam_sup = lambda_sup_closed_form(tr, tr_sq, D)
    eig = jacobi_eigh(H)
    lam1 = float(eig[0])
    psd = bool(eig[-1] >= -1e-8 * max(1.0, abs(lam1)))
    return SpectrumReport(eig, lam1, mu, sigma2, lam_sup, psd)


def lambda_sup_from_batch(batch: BatchTrace, params: NetworkParams) -> float:
    """Closed-form bound straight from forward quantities (no Hessian)."""
    _, _, tr = trace_closed_form(batch, params)
    tr_sq, *_ = trace_sq_closed_form(batch, params)
    return lambda_sup_closed_form(tr, tr_sq, params.shape.D)[2]


def flatness_constant(batch: BatchTrace, params: NetworkParams) -> float:
    """A constant ``C`` with ``lambda_sup <= C * max_i |delta_i|``.

    Uses ``s'(z_i) <= |delta_i|`` (true for 0/1 labels): the trace is linear
    and ``tr(H^2)`` bilinear in ``o_i = (s'_i, delta_i)``, so both shrink with
    the largest residual.
    """
    Vt = params.V_tilde
    xx = np.einsum("mi,mi->i", batch.X, batch.X)
    rr = np.einsum("in,in->i", batch.R, batch.R)
    a = batch.Fp * Vt
    c1 = float(np.sum((1.0 + xx) * (np.sum(a * a, axis=1) + np.abs(batch.Fpp @ Vt)) + (1.0 + rr)))

    phi_parts, psi_parts = bilinear_components(batch, params)
    gx = 1.0 + batch.X.T @ batch.X
    gr = 1.0 + batch.R @ batch.R.T
    abs_phi = sum(np.abs(P) for P in phi_parts)
    abs_psi = sum(np.abs(P) for P in psi_parts)
    c2 = float(np.sum(abs_phi * gx**2 + 2.0 * abs_psi * np.abs(gx) + gr**2))
    D = params.shape.D
    return c1 / D + math.sqrt(D - 1) * math.sqrt(c2 / D)


def asymptotic_flatness_check(batch: BatchTrace, params: NetworkParams, eps: float) -> bool:
    """If every ``|delta_i| < eps`` then ``lambda_sup <= C * eps``.

    Returns the truth value of that implication (vacuously true when some
    residual is at least ``eps``).
    """
    if not eps > 0:
        raise DomainError("eps must be positive")
    if float(np.max(np.abs(batch.delta))) >= eps:
        return True
    lam_sup = lambda_sup_from_batch(batch, params)
    return bool(lam_sup <= flatness_constant(batch, params) * eps)


def save_spectrum_json(report: SpectrumReport, path) -> None:
    Path(path).write_text(json.dumps(report.to_json(), indent=2) + "\n", encoding="utf-8")
