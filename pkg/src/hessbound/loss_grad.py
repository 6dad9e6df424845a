"""Binary cross-entropy loss and its analytic gradient in theta-space."""

from __future__ import annotations

import numpy as np

from .activations import ActivationKind
from .errors import DomainError
from .network import (
    BatchTrace,
    Dataset,
    ForwardTrace,
    NetworkParams,
    NetworkShape,
    forward,
    forward_batch,
    unflatten,
)


def _softplus(z):
    return np.logaddexp(0.0, z)


def _sample_losses(z, q):
    # -q log p - (1-q) log(1-p) == softplus(-z) for q=1, softplus(z) for q=0
    return np.where(q == 1, _softplus(-z), _softplus(z))


def ordered_sum(values: np.ndarray) -> np.ndarray:
    """Sum along axis 0 strictly in ascending index order."""
    values = np.asarray(values)
    if values.shape[0] == 0:
        return np.zeros(values.shape[1:])
    return np.cumsum(values, axis=0)[-1]


def loss(trace: ForwardTrace, q: int) -> float:
    if q not in (0, 1):
        raise DomainError(f"label must be 0 or 1, got {q}")
    return float(_sample_losses(np.array(trace.z), np.array(q)))


def batch_losses(batch: BatchTrace) -> np.ndarray:
    return _sample_losses(batch.z, batch.q)


def total_loss(params: NetworkParams, kind: ActivationKind, data: Dataset) -> float:
    return float(ordered_sum(batch_losses(forward_batch(params, kind, data))))


def grad_single(params: NetworkParams, kind: ActivationKind, x, q: int) -> np.ndarray:
    """Gradient of one sample's loss, laid out as ``theta`` (length D).

    The w-part is ``delta * h(x) kron (f'(y) * V_tilde)`` and the v-part is
    ``delta * h(r)``.
    """
    tr = forward(params, kind, x, q)
    hx = np.concatenate([[1.0], np.asarray(x, dtype=np.float64).reshape(-1)])
    hr = np.concatenate([[1.0], tr.r])
    a = (tr.f1 * params.V_tilde) * tr.delta
    g_w = (hx[:, None] * a[None, :]).reshape(-1)
    g_v = tr.delta * hr
    return np.concatenate([g_w, g_v])


def batch_grads(params: NetworkParams, batch: BatchTrace) -> np.ndarray:
    """Per-sample gradients as an ``I x D`` array (row i = grad of l_i)."""
    I = batch.I
    Hx = np.hstack([np.ones((I, 1)), batch.X.T])
    Hr = np.hstack([np.ones((I, 1)), batch.R])
    A = (batch.Fp * params.V_tilde) * batch.delta[:, None]
    Gw = (Hx[:, :, None] * A[:, None, :]).reshape(I, -1)
    Gv = batch.delta[:, None] * Hr
    return np.hstack([Gw, Gv])


def grad_total(params: NetworkParams, kind: ActivationKind, data: Dataset) -> np.ndarray:
    batch = forward_batch(params, kind, data)
    return ordered_sum(batch_grads(params, batch))


def loss_and_grad(theta, shape: NetworkShape, kind: ActivationKind, data: Dataset):
    """Total loss and gradient at a flat parameter vector, one forward pass."""
    params = unflatten(theta, shape)
    batch = forward_batch(params, kind, data)
    L = float(ordered_sum(batch_losses(batch)))
    return L, ordered_sum(batch_grads(params, batch))


def split_gradient(g, shape: NetworkShape) -> tuple[np.ndarray, np.ndarray]:
    """Split a theta-space vector into its ``(w, v)`` parts."""
    g = np.asarray(g)
    return g[: shape.n_w], g[shape.n_w :]
