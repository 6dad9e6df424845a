"""Three-layer network: parameter layout, datasets and the forward pass.

The model is ``y = W h(x)``, ``r = f(y)``, ``z = V h(r)``, ``p = sigmoid(z)``
where ``h`` prepends a constant 1.  ``W`` is ``N x (M+1)`` with the bias in
column 0 and ``V`` is ``1 x (N+1)`` with the bias in entry 0.

The flat parameter vector is ``theta = [w; v]`` where ``w`` stacks the columns
of ``W`` (column 0 first) and ``v = V^T``.  Index ``m*N + n`` of ``w`` is
therefore ``W[n, m]``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .activations import ActivationKind, eval_vec
from .errors import DomainError, NumericError, ShapeError


def param_dim(M: int, N: int) -> int:
    if int(M) != M or int(N) != N or M < 1 or N < 1:
        raise DomainError(f"dimensions must be positive integers, got M={M}, N={N}")
    return int(M) * int(N) + 2 * int(N) + 1


@dataclass(frozen=True)
class NetworkShape:
    M: int
    N: int

    def __post_init__(self):
        param_dim(self.M, self.N)

    @property
    def D(self) -> int:
        return param_dim(self.M, self.N)

    @property
    def n_w(self) -> int:
        return (self.M + 1) * self.N

    @property
    def n_v(self) -> int:
        return self.N + 1


@dataclass
class NetworkParams:
    W: np.ndarray
    V: np.ndarray
    shape: NetworkShape

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.V = np.asarray(self.V, dtype=np.float64).reshape(-1)
        M, N = self.shape.M, self.shape.N
        if self.W.shape != (N, M + 1):
            raise ShapeError(f"W must be {(N, M + 1)}, got {self.W.shape}")
        if self.V.shape != (N + 1,):
            raise ShapeError(f"V must have {N + 1} entries, got {self.V.shape}")

    @property
    def V_tilde(self) -> np.ndarray:
        """Output weights without the bias, shape ``(N,)``."""
        return self.V[1:]

    @property
    def W_tilde(self) -> np.ndarray:
        """Input weights without the bias column, shape ``(N, M)``."""
        return self.W[:, 1:]

    @classmethod
    def zeros(cls, M: int, N: int) -> "NetworkParams":
        return cls(np.zeros((N, M + 1)), np.zeros(N + 1), NetworkShape(M, N))


def flatten(params: NetworkParams) -> np.ndarray:
    w = params.W.T.reshape(-1)
    return np.concatenate([w, params.V])


def unflatten(theta, shape: NetworkShape) -> NetworkParams:
    theta = np.asarray(theta, dtype=np.float64)
    if theta.ndim != 1 or theta.shape[0] != shape.D:
        raise ShapeError(f"theta must have length D={shape.D}, got shape {theta.shape}")
    n_w = shape.n_w
    W = theta[:n_w].reshape(shape.M + 1, shape.N).T.copy()
    V = theta[n_w:].copy()
    return NetworkParams(W, V, shape)


@dataclass
class Dataset:
    """Inputs ``X`` (``M x I``, one sample per column) and labels ``q``."""

    X: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        self.q = np.asarray(self.q).reshape(-1).astype(np.int64)
        if self.X.shape[1] != self.q.shape[0] or self.q.shape[0] < 1:
            raise ShapeError(
                f"X has {self.X.shape[1]} columns but q has {self.q.shape[0]} labels"
            )
        if not np.all((self.q == 0) | (self.q == 1)):
            raise DomainError("labels must be 0 or 1")

    @property
    def M(self) -> int:
        return self.X.shape[0]

    @property
    def I(self) -> int:  # noqa: E743
        return self.X.shape[1]

    def concat(self, other: "Dataset") -> "Dataset":
        return Dataset(np.hstack([self.X, other.X]), np.concatenate([self.q, other.q]))

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.X[:, idx], self.q[idx])


@dataclass
class ForwardTrace:
    y: np.ndarray
    r: np.ndarray
    z: float
    p: float
    delta: float
    s1: float
    f1: np.ndarray
    f2: np.ndarray


@dataclass
class BatchTrace:
    """Forward quantities for a whole dataset, one row per sample.

    ``Y``, ``R``, ``Fp``, ``Fpp`` are ``I x N``; note that the hidden
    activation matrix with samples as columns is ``R.T``.
    """

    X: np.ndarray
    q: np.ndarray
    Y: np.ndarray
    R: np.ndarray
    z: np.ndarray
    p: np.ndarray
    delta: np.ndarray
    s1: np.ndarray
    Fp: np.ndarray
    Fpp: np.ndarray

    @property
    def I(self) -> int:  # noqa: E743
        return self.z.shape[0]

    def __len__(self) -> int:
        return self.I

    def __getitem__(self, i: int) -> ForwardTrace:
        return ForwardTrace(
            y=self.Y[i],
            r=self.R[i],
            z=float(self.z[i]),
            p=float(self.p[i]),
            delta=float(self.delta[i]),
            s1=float(self.s1[i]),
            f1=self.Fp[i],
            f2=self.Fpp[i],
        )

    @property
    def traces(self) -> list[ForwardTrace]:
        return [self[i] for i in range(self.I)]


def sigmoid(z):
    return expit(z)


def _logit_terms(z, q):
    """Return ``(p(1-p), p-q)`` without cancellation when p is near 0 or 1."""
    p, p_neg = expit(z), expit(-z)
    return p * p_neg, np.where(q == 1, -p_neg, p)


def _affine(bias, weights, inputs):
    """``bias + sum_k weights[k] * inputs[k]`` accumulated in ascending k.

    Avoids BLAS so a sample gives bit-identical results alone or in a batch.
    """
    out = bias
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(inputs.shape[0]):
            out = out + weights[k] * inputs[k]
    return out


def _check_finite(arr, stage):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite value in {stage} stage", stage=stage)


def forward(params: NetworkParams, kind: ActivationKind, x, q: int) -> ForwardTrace:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != params.shape.M:
        raise ShapeError(f"x must have {params.shape.M} entries, got {x.shape[0]}")
    if q not in (0, 1):
        raise DomainError(f"label must be 0 or 1, got {q}")
    _check_finite(x, "input")
    y = _affine(params.W[:, 0], params.W[:, 1:].T, x)
    _check_finite(y, "pre-activation")
    r, f1, f2 = eval_vec(kind, y)
    _check_finite(r, "hidden")
    z = float(_affine(params.V[0], params.V_tilde, r))
    if not math.isfinite(z):
        raise NumericError("non-finite logit", stage="logit")
    p = float(sigmoid(z))
    s1, delta = _logit_terms(np.array(z), np.array(q))
    return ForwardTrace(y=y, r=r, z=z, p=p, delta=float(delta), s1=float(s1), f1=f1, f2=f2)


def forward_batch(params: NetworkParams, kind: ActivationKind, data: Dataset) -> BatchTrace:
    if data.M != params.shape.M:
        raise ShapeError(f"dataset has M={data.M}, network expects M={params.shape.M}")
    _check_finite(data.X, "input")
    Y = _affine(params.W[:, 0][:, None], params.W[:, 1:].T[:, :, None], data.X).T
    _check_finite(Y, "pre-activation")
    R, Fp, Fpp = eval_vec(kind, Y)
    _check_finite(R, "hidden")
    z = _affine(params.V[0], params.V_tilde, R.T)
    _check_finite(z, "logit")
    p = sigmoid(z)
    s1, delta = _logit_terms(z, data.q)
    return BatchTrace(
        X=data.X,
        q=data.q,
        Y=Y,
        R=R,
        z=z,
        p=p,
        delta=delta,
        s1=s1,
        Fp=Fp,
        Fpp=Fpp,
    )


# -- file formats -------------------------------------------------------------


def save_dataset_csv(data: Dataset, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x_{m + 1}" for m in range(data.M)] + ["q"])
        for i in range(data.I):
            writer.writerow([repr(float(v)) for v in data.X[:, i]] + [int(data.q[i])])


def load_dataset_csv(path) -> Dataset:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[-1] != "q":
            raise ShapeError("dataset CSV must have header x_1..x_M,q")
        rows = [row for row in reader if row]
    X = np.array([[float(v) for v in row[:-1]] for row in rows]).T
    q = np.array([int(row[-1]) for row in rows])
    return Dataset(X.reshape(len(header) - 1, len(rows)), q)


def params_to_json(params: NetworkParams) -> dict:
    return {
        "M": params.shape.M,
        "N": params.shape.N,
        "theta": [float(v) for v in flatten(params)],
    }


def params_from_json(obj: dict) -> NetworkParams:
    shape = NetworkShape(int(obj["M"]), int(obj["N"]))
    return unflatten(np.array(obj["theta"], dtype=np.float64), shape)


def save_params_json(params: NetworkParams, path) -> None:
    Path(path).write_text(json.dumps(params_to_json(params)) + "\n", encoding="utf-8")


def load_params_json(path) -> NetworkParams:
    return params_from_json(json.loads(Path(path).read_text(encoding="utf-8")))
