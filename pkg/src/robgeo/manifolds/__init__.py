"""Manifold backends: sphere, hyperboloid, Kendall shape space, flat space."""
from .base import Manifold
from .constant_curvature import (
    Hyperbolic,
    Sphere,
    hyperboloid_from_poincare,
    poincare_from_hyperboloid,
)
from .euclidean import Euclidean
from .kendall import KendallShape, align, as_complex, as_real, preshape

_KINDS = {
    "sphere": Sphere,
    "hyperbolic": Hyperbolic,
    "kendall": KendallShape,
    "shape": KendallShape,
    "euclidean": Euclidean,
}


def get_manifold(kind, size):
    """Build a manifold from its tag.

    ``size`` is the intrinsic dimension for sphere, hyperbolic and euclidean,
    and the number of landmarks for the shape space.
    """
    try:
        cls = _KINDS[kind.lower()]
    except KeyError:
        raise ValueError(f"unknown manifold {kind!r}; choose from {sorted(_KINDS)}") from None
    return cls(size)


__all__ = [
    "Euclidean",
    "Hyperbolic",
    "KendallShape",
    "Manifold",
    "Sphere",
    "align",
    "as_complex",
    "as_real",
    "get_manifold",
    "hyperboloid_from_poincare",
    "poincare_from_hyperboloid",
    "preshape",
]
