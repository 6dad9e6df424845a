"""Closed-form Hessian traces and a spectral upper bound on the largest
Hessian eigenvalue for a three-layer network trained with cross-entropy."""

from .activations import ActivationKind, ActivationProfile, profile
from .bound import SpectrumReport, jacobi_eigh, lambda_sup_closed_form, spectrum_report
from .errors import DomainError, NumericError, ShapeError
from .hessian import HessianBundle, hessian_single, hessian_total
from .loss_grad import grad_single, grad_total, loss_and_grad, total_loss
from .network import Dataset, NetworkParams, NetworkShape, flatten, forward, forward_batch, unflatten
from .traces import TraceBounds, TraceBundle, trace_bounds, trace_bundle

__all__ = [
    "ActivationKind",
    "ActivationProfile",
    "Dataset",
    "DomainError",
    "HessianBundle",
    "NetworkParams",
    "NetworkShape",
    "NumericError",
    "ShapeError",
    "SpectrumReport",
    "TraceBounds",
    "TraceBundle",
    "flatten",
    "forward",
    "forward_batch",
    "grad_single",
    "grad_total",
    "hessian_single",
    "hessian_total",
    "jacobi_eigh",
    "lambda_sup_closed_form",
    "loss_and_grad",
    "profile",
    "spectrum_report",
    "total_loss",
    "trace_bounds",
    "trace_bundle",
    "unflatten",
]
