"""Flat space, where the geodesic machinery reduces to linear algebra."""
import numpy as np

from ..errors import DomainError
from .base import Manifold


class Euclidean(Manifold):
    """``R^n`` with ``Exp(p, v) = p + v``; used to check the solver against OLS."""

    name = "euclidean"

    def __init__(self, n):
        n = int(n)
        if n < 1:
            raise DomainError(f"dimension must be >= 1, got {n}")
        self.n = n

    @property
    def dim(self):
        return self.n

    @property
    def ambient_dim(self):
        return self.n

    def _param(self):
        return self.n

    def inner(self, u, v):
        (u2, v2), single = self._batch(u, v)
        return self._unbatch(np.einsum("ij,ij->i", u2, v2), single)

    def exp(self, p, v):
        (p2, v2), single = self._batch(p, v)
        return self._unbatch(p2 + v2, single)

    def log(self, p, q):
        (p2, q2), single = self._batch(p, q)
        return self._unbatch(q2 - p2, single)

    def dist(self, p, q):
        (p2, q2), single = self._batch(p, q)
        return self._unbatch(np.linalg.norm(q2 - p2, axis=1), single)

    def transport(self, p, q, v):
        (_, _, v2), single = self._batch(p, q, v)
        return self._unbatch(v2.copy(), single)

    def adjoints(self, p, vx, yhat, e):
        (_, _, _, e2), single = self._batch(p, vx, yhat, e)
        return self._unbatch(e2.copy(), single), self._unbatch(e2.copy(), single)

    def project(self, p, v):
        (_, v2), single = self._batch(p, v)
        return self._unbatch(v2, single)

    def normalize(self, p):
        return np.asarray(p, dtype=float)

    def check_point(self, p, tol=1e-10):
        return bool(np.all(np.isfinite(p)))

    def extrinsic_mean(self, points):
        (pts,), _ = self._batch(points)
        return pts.mean(axis=0)

    def random_point(self, rng, size=None):
        shape = (self.n,) if size is None else (size, self.n)
        return rng.standard_normal(shape)
