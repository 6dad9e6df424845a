"""Closed-form ``tr(H)`` and ``tr(H^2)`` of the total-loss Hessian, and the
upper bounds on them, computed from forward quantities only.

With ``o_i = (s'(z_i), delta_i)`` each pair of samples contributes three
bilinear forms ``phi_ij``, ``psi_ij``, ``omega_ij`` and::

    tr(H^2) = sum_ij phi_ij (1 + x_i.x_j)^2
            + 2 sum_ij psi_ij (1 + x_i.x_j)
            + sum_ij omega_ij (1 + r_i.r_j)^2
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .activations import ActivationKind, ActivationProfile
from .errors import ShapeError
from .loss_grad import ordered_sum
from .network import BatchTrace, Dataset, NetworkParams


@dataclass
class TraceBundle:
    tr_ww: float
    tr_vv: float
    tr_total: float
    tr_sq_total: float
    Phi: np.ndarray
    Psi: np.ndarray
    Omega: np.ndarray

    def to_json(self) -> dict:
        return {
            "tr_ww": self.tr_ww,
            "tr_vv": self.tr_vv,
            "tr_total": self.tr_total,
            "tr_sq_total": self.tr_sq_total,
        }


@dataclass
class TraceBounds:
    ub_tr_vv: float
    ub_tr_ww: float
    ub_tr_sq: float
    phi_max: float
    ub_tr_ww_signed: float

    def to_json(self) -> dict:
        return {k: (None if math.isinf(v) else v) for k, v in asdict(self).items()}


def _check(batch: BatchTrace, params: NetworkParams, I=None):
    if batch.R.shape[1] != params.shape.N or batch.X.shape[0] != params.shape.M:
        raise ShapeError("batch trace does not match network dimensions")
    if I is not None and I != batch.I:
        raise ShapeError(f"expected {I} samples, batch has {batch.I}")


def trace_closed_form(batch: BatchTrace, params: NetworkParams, I=None):
    """Return ``(tr_ww, tr_vv, tr_total)``."""
    _check(batch, params, I)
    Vt = params.V_tilde
    xx = np.einsum("mi,mi->i", batch.X, batch.X)
    rr = np.einsum("in,in->i", batch.R, batch.R)
    a = batch.Fp * Vt
    per_ww = (1.0 + xx) * (batch.s1 * np.einsum("in,in->i", a, a) + batch.delta * (batch.Fpp @ Vt))
    per_vv = batch.s1 * (1.0 + rr)
    tr_ww = float(ordered_sum(per_ww))
    tr_vv = float(ordered_sum(per_vv))
    return tr_ww, tr_vv, tr_ww + tr_vv


def bilinear_components(batch: BatchTrace, params: NetworkParams):
    """Entry matrices of the 2x2 kernels, each ``I x I``.

    Returns ``(phi_parts, psi_parts)`` where each is the tuple
    ``(P11, P12, P21, P22)`` with ``P[i, j]`` the kernel entry for pair (i, j).
    """
    Vt = params.V_tilde
    Fp, Fpp, R = batch.Fp, batch.Fpp, batch.R

    a = Fp * Vt
    K = a @ a.T  # V F'_j F'_i V^T
    phi11 = K * K
    phi12 = (Fp * Fp * Vt**3) @ Fpp.T  # V F'_i diag(V) F''_j F'_i V^T
    phi21 = phi12.T
    b = Fpp * Vt
    phi22 = b @ b.T

    rr = R @ R.T
    psi11 = (1.0 + rr) * K
    psi12 = (R * a) @ Fp.T  # r_i^T F'_j F'_i V^T
    psi21 = psi12.T
    psi22 = Fp @ Fp.T
    return (phi11, phi12, phi21, phi22), (psi11, psi12, psi21, psi22)


def bilinear_matrices(batch: BatchTrace, params: NetworkParams):
    """The ``I x I`` matrices ``(Phi, Psi, Omega)``."""
    (phi11, phi12, phi21, phi22), (psi11, psi12, psi21, psi22) = bilinear_components(batch, params)
    s = batch.s1
    d = batch.delta
    ss = np.outer(s, s)
    sd = np.outer(s, d)
    ds = np.outer(d, s)
    dd = np.outer(d, d)
    Phi = ss * phi11 + sd * phi12 + ds * phi21 + dd * phi22
    Psi = ss * psi11 + sd * psi12 + ds * psi21 + dd * psi22
    Omega = ss
    return Phi, Psi, Omega


def _gram_plus_one(cols: np.ndarray) -> np.ndarray:
    """``J + C^T C`` for a matrix whose columns are samples."""
    return 1.0 + cols.T @ cols


def trace_sq_closed_form(batch: BatchTrace, params: NetworkParams, I=None):
    """Return ``(tr_sq_total, Phi, Psi, Omega)`` via the double-sum form."""
    _check(batch, params, I)
    Phi, Psi, Omega = bilinear_matrices(batch, params)
    gx = _gram_plus_one(batch.X)
    gr = _gram_plus_one(batch.R.T)
    n = batch.I
    t_phi = t_psi = t_omega = 0.0
    for i in range(n):
        for j in range(n):
            t_phi += Phi[i, j] * gx[i, j] ** 2
            t_psi += Psi[i, j] * gx[i, j]
            t_omega += Omega[i, j] * gr[i, j] ** 2
    return float(t_phi + 2.0 * t_psi + t_omega), Phi, Psi, Omega


def trace_sq_matrix_form(batch: BatchTrace, params: NetworkParams) -> float:
    """Same quantity through Frobenius inner products; cross-check only."""
    Phi, Psi, Omega = bilinear_matrices(batch, params)
    gx = _gram_plus_one(batch.X)
    gr = _gram_plus_one(batch.R.T)
    return float(np.vdot(Phi, gx**2) + 2.0 * np.vdot(Psi, gx) + np.vdot(Omega, gr**2))


def trace_bundle(batch: BatchTrace, params: NetworkParams) -> TraceBundle:
    tr_ww, tr_vv, tr_total = trace_closed_form(batch, params)
    tr_sq, Phi, Psi, Omega = trace_sq_closed_form(batch, params)
    return TraceBundle(tr_ww, tr_vv, tr_total, tr_sq, Phi, Psi, Omega)


def trace_bounds(
    prof: ActivationProfile, params: NetworkParams, data: Dataset, batch: BatchTrace
) -> TraceBounds:
    """Upper bounds on ``tr H(v,v)``, ``tr H(w,w)`` and ``tr H^2``.

    ``ub_tr_ww`` bounds the curvature term ``delta * V_tilde . f''(y)`` by
    ``zeta2 * ||V_tilde||_1``, which holds for every sign pattern of the
    output weights.  ``ub_tr_ww_signed`` keeps ``zeta2 * |sum(V_tilde)|``
    instead; it is tighter but only valid when the output weights share a
    sign (see the README).
    """
    _check(batch, params)
    I, N = data.I, params.shape.N
    Vt = params.V_tilde
    ub_vv = 0.25 * I * (N + 1) if prof.saturating else math.inf

    sum_x = float(np.sum(1.0 + np.einsum("mi,mi->i", data.X, data.X)))
    first = 0.25 * prof.zeta1 * float(Vt @ Vt)
    ub_ww = (first + prof.zeta2 * float(np.sum(np.abs(Vt)))) * sum_x
    ub_ww_signed = (first + prof.zeta2 * abs(float(np.sum(Vt)))) * sum_x

    Phi, Psi, _ = bilinear_matrices(batch, params)
    phi_max = float(Phi.max())
    gx = _gram_plus_one(data.X)
    gr = _gram_plus_one(batch.R.T)
    ub_sq = float(np.sum(Psi**2) + (1.0 + phi_max) * np.sum(gx**2) + np.sum(gr**2) / 16.0)
    return TraceBounds(ub_vv, ub_ww, ub_sq, phi_max, ub_ww_signed)


def normalized_input_maxima(M: int, N: int, I: int, kind: ActivationKind):
    """Maxima of the data-dependent factors for inputs in ``[0, 1]``.

    Returns ``(I(1+M), I^2 (1+M)^2, I^2 (1+N)^2 or inf)``; the last one is
    finite only for saturating activations.
    """
    kind = ActivationKind.parse(kind)
    sup_r = float(I * I * (1 + N) ** 2) if kind in (ActivationKind.SIGMOID, ActivationKind.TANH) else math.inf
    return float(I * (1 + M)), float(I * I * (1 + M) ** 2), sup_r


def trace_sandwich_check(tr_total: float, tr_sq_total: float, D: int, psd: bool, rtol: float = 1e-12) -> bool:
    """``tr^2 / D <= tr(H^2)`` always; ``tr(H^2) <= tr^2`` only if PSD.

    ``rtol`` absorbs round-off in the traces themselves.
    """
    tr2 = tr_total * tr_total
    slack = rtol * max(1.0, tr2, abs(tr_sq_total))
    ok = tr2 / D <= tr_sq_total + slack
    if psd:
        ok = ok and tr_sq_total <= tr2 + slack
    return bool(ok)


def save_trace_json(bundle: TraceBundle, path) -> None:
    Path(path).write_text(json.dumps(bundle.to_json(), indent=2) + "\n", encoding="utf-8")


def save_bilinear_csv(bundle: TraceBundle, directory) -> None:
    """Write ``Phi.csv``, ``Psi.csv`` and ``Omega.csv`` (no header, row-major)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, mat in (("Phi", bundle.Phi), ("Psi", bundle.Psi), ("Omega", bundle.Omega)):
        lines = [",".join(repr(float(v)) for v in row) for row in np.asarray(mat)]
        (directory / f"{name}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
