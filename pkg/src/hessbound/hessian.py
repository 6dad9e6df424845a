"""Analytic Hessian of the cross-entropy loss, block by block.

For one sample with ``a = f'(y) * V_tilde``::

    H(w,w) = h(x) h(x)^T kron (s' a a^T + delta diag(V_tilde * f''(y)))
    H(w,v) = h(x) kron (s' a h(r)^T + delta [0 | diag(f'(y))])
    H(v,v) = s' h(r) h(r)^T

and ``H(v,w) = H(w,v)^T``.  Kronecker rows/columns follow the flatten layout
(index ``m*N + n``).  Only the upper triangle of the assembled matrix is
trusted; the lower triangle is a mirror copy, never an average.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .activations import ActivationKind
from .loss_grad import ordered_sum
from .network import BatchTrace, Dataset, NetworkParams, forward_batch


@dataclass
class HessianBundle:
    Hww: np.ndarray
    Hwv: np.ndarray
    Hvw: np.ndarray
    Hvv: np.ndarray
    assembled: np.ndarray

    @property
    def D(self) -> int:
        return self.assembled.shape[0]


def _mirror_upper(A: np.ndarray) -> np.ndarray:
    upper = np.triu(A)
    return upper + np.triu(A, 1).T


def per_sample_blocks(params: NetworkParams, batch: BatchTrace):
    """Stacks of per-sample blocks ``(Hww, Hwv, Hvv)`` with leading axis I."""
    I, N = batch.I, params.shape.N
    Hx = np.hstack([np.ones((I, 1)), batch.X.T])
    Hr = np.hstack([np.ones((I, 1)), batch.R])
    s1 = batch.s1
    delta = batch.delta
    A = batch.Fp * params.V_tilde

    # N x N core of H(w,w)
    sa = s1[:, None] * A
    core = sa[:, :, None] * A[:, None, :]
    diag_idx = np.arange(N)
    core[:, diag_idx, diag_idx] += delta[:, None] * (params.V_tilde * batch.Fpp)
    outer_x = Hx[:, :, None] * Hx[:, None, :]
    Hww = np.einsum("iab,inm->ianbm", outer_x, core).reshape(I, Hx.shape[1] * N, -1)

    # N x (N+1) core of H(w,v)
    B = sa[:, :, None] * Hr[:, None, :]
    B[:, diag_idx, diag_idx + 1] += delta[:, None] * batch.Fp
    Hwv = (Hx[:, :, None, None] * B[:, None, :, :]).reshape(I, Hx.shape[1] * N, N + 1)

    Hvv = (s1[:, None] * Hr)[:, :, None] * Hr[:, None, :]
    return Hww, Hwv, Hvv


def _bundle(Hww, Hwv, Hvv) -> HessianBundle:
    full = np.block([[Hww, Hwv], [Hwv.T, Hvv]])
    full = _mirror_upper(full)
    n_w = Hww.shape[0]
    Hwv_sym = full[:n_w, n_w:].copy()
    return HessianBundle(
        Hww=full[:n_w, :n_w].copy(),
        Hwv=Hwv_sym,
        Hvw=Hwv_sym.T.copy(),
        Hvv=full[n_w:, n_w:].copy(),
        assembled=full,
    )


def hessian_from_batch(params: NetworkParams, batch: BatchTrace) -> HessianBundle:
    Hww, Hwv, Hvv = per_sample_blocks(params, batch)
    return _bundle(ordered_sum(Hww), ordered_sum(Hwv), ordered_sum(Hvv))


def hessian_total(params: NetworkParams, kind: ActivationKind, data: Dataset) -> HessianBundle:
    return hessian_from_batch(params, forward_batch(params, kind, data))


def hessian_single(params: NetworkParams, kind: ActivationKind, x, q: int) -> HessianBundle:
    x = np.asarray(x, dtype=np.float64).reshape(-1, 1)
    return hessian_total(params, kind, Dataset(x, [q]))


def save_hessian_csv(H: np.ndarray, path) -> None:
    """Write the matrix row-major, one CSV row per matrix row, no header."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(H):
            writer.writerow([repr(float(v)) for v in row])


def load_hessian_csv(path) -> np.ndarray:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return np.array([[float(v) for v in row] for row in csv.reader(fh) if row])
