"""Robust geodesic regression on Riemannian manifolds."""
from ._backend import BACKEND
from .losses import LossSpec
from .manifolds import Euclidean, Hyperbolic, KendallShape, Sphere, get_manifold
from .regression import FitResult, GeodesicModel, SolverConfig, fit, intrinsic_mean

__all__ = [
    "BACKEND",
    "Euclidean",
    "FitResult",
    "GeodesicModel",
    "Hyperbolic",
    "KendallShape",
    "LossSpec",
    "SolverConfig",
    "Sphere",
    "fit",
    "get_manifold",
    "intrinsic_mean",
]

__version__ = "0.1.0"
