"""Smooth activation functions, their first two derivatives and extrema.

Five families are supported: linear, sigmoid, tanh, smooth ReLU (softplus)
and GELU.  All evaluators are vectorised over numpy arrays and stay finite
for inputs of magnitude up to several hundred.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, ndtr

from .errors import DomainError

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class ActivationKind(enum.Enum):
    LINEAR = "linear"
    SIGMOID = "sigmoid"
    TANH = "tanh"
    SMOOTHRELU = "smoothrelu"
    GELU = "gelu"

    @classmethod
    def parse(cls, name: "str | ActivationKind") -> "ActivationKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            choices = ", ".join(k.value for k in cls)
            raise DomainError(f"unknown activation {name!r}; expected one of {choices}") from None

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class ActivationProfile:
    """Closed-form extrema of f' and f'' plus the trace-bound constants."""

    kind: ActivationKind
    f_prime_max: float
    f_prime_inf: float
    f_second_max: float
    f_second_min: float
    zeta1: float
    zeta2: float
    output_sup: float

    @property
    def saturating(self) -> bool:
        return math.isfinite(self.output_sup)


def _gauss_pdf(y):
    return INV_SQRT_2PI * np.exp(-0.5 * y * y)


def _sigmoid_triplet(y):
    f = expit(y)
    f1 = f * (1.0 - f)
    f2 = (1.0 - 2.0 * f) * f1
    return f, f1, f2


def _softplus(y):
    return np.logaddexp(0.0, y)


def eval_vec(kind: ActivationKind, y):
    """Return ``(f(y), f'(y), f''(y))`` componentwise.

    ``y`` may be any array shape; the outputs share it.
    """
    kind = ActivationKind.parse(kind)
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise DomainError("activation input contains non-finite values")

    if kind is ActivationKind.LINEAR:
        return y.copy(), np.ones_like(y), np.zeros_like(y)
    if kind is ActivationKind.SIGMOID:
        return _sigmoid_triplet(y)
    if kind is ActivationKind.TANH:
        f = np.tanh(y)
        f1 = 1.0 - f * f
        return f, f1, -2.0 * f * f1
    if kind is ActivationKind.SMOOTHRELU:
        # f' is the logistic sigmoid, f'' its derivative
        s, s1, _ = _sigmoid_triplet(y)
        return _softplus(y), s, s1
    # GELU, exact erf form
    G = ndtr(y)
    g = _gauss_pdf(y)
    return y * G, G + y * g, g * (SQRT2 - y) * (SQRT2 + y)


def eval(kind: ActivationKind, y: float) -> tuple[float, float, float]:
    """Scalar version of :func:`eval_vec`."""
    y = float(y)
    if not math.isfinite(y):
        raise DomainError(f"activation input must be finite, got {y}")
    f, f1, f2 = eval_vec(kind, np.array(y))
    return float(f), float(f1), float(f2)


def _gelu_profile() -> ActivationProfile:
    g_root2 = float(_gauss_pdf(SQRT2))
    fp_max = float(ndtr(SQRT2)) + SQRT2 * g_root2
    fp_min = float(ndtr(-SQRT2)) - SQRT2 * g_root2
    f2_max = math.sqrt(2.0 / math.pi)
    f2_min = float(_gauss_pdf(2.0)) * (SQRT2 - 2.0) * (SQRT2 + 2.0)
    return ActivationProfile(
        kind=ActivationKind.GELU,
        f_prime_max=fp_max,
        f_prime_inf=fp_min,
        f_second_max=f2_max,
        f_second_min=f2_min,
        zeta1=max(fp_max, -fp_min) ** 2,
        zeta2=max(f2_max, -f2_min),
        output_sup=math.inf,
    )


_PROFILES = {
    ActivationKind.LINEAR: ActivationProfile(
        ActivationKind.LINEAR, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, math.inf
    ),
    ActivationKind.SIGMOID: ActivationProfile(
        ActivationKind.SIGMOID, 0.25, 0.0, SQRT3 / 18.0, -SQRT3 / 18.0, 1.0 / 16.0, SQRT3 / 18.0, 1.0
    ),
    ActivationKind.TANH: ActivationProfile(
        ActivationKind.TANH, 1.0, 0.0, 4.0 * SQRT3 / 9.0, -4.0 * SQRT3 / 9.0, 1.0, 4.0 * SQRT3 / 9.0, 1.0
    ),
    # f' = sigmoid: sup 1 (not attained), f'' = sigmoid': max 1/4, inf 0
    ActivationKind.SMOOTHRELU: ActivationProfile(
        ActivationKind.SMOOTHRELU, 1.0, 0.0, 0.25, 0.0, 1.0, 0.25, math.inf
    ),
    ActivationKind.GELU: _gelu_profile(),
}


def profile(kind: ActivationKind) -> ActivationProfile:
    return _PROFILES[ActivationKind.parse(kind)]
