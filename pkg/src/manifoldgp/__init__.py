"""Gaussian processes with spectral Matérn covariograms on compact manifolds."""

from ._series import BACKEND
from .spectrum import ManifoldSpec, circle, custom, sphere, sphere2
from .kernel import MaternParams, SqExpParams, TruncatedValue, TruncationError, TruncationPolicy

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ManifoldSpec",
    "circle",
    "sphere2",
    "sphere",
    "custom",
    "MaternParams",
    "SqExpParams",
    "TruncationPolicy",
    "TruncatedValue",
    "TruncationError",
]
