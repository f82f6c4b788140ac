"""The unit sphere S^n and the hyperboloid model of H^n.

Both share one set of kernels parameterized by the sign of the curvature;
the per-row loops live in the active backend (``robgeo._backend``).
"""
import math

import numpy as np

from .. import _backend
from ..errors import CutLocusError, DomainError
from .base import Manifold

# Angles closer than this to pi are treated as the sphere's cut locus.
CUT_MARGIN = 1e-6


class _ConstantCurvature(Manifold):
    curv = 0

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
        return self.n + 1

    def _param(self):
        return self.n

    def origin(self):
        o = np.zeros(self.ambient_dim)
        o[0] = 1.0
        return o

    def inner(self, u, v):
        (u2, v2), single = self._batch(u, v)
        return self._unbatch(_backend.kernels.cc_inner(u2, v2, self.curv), single)

    def exp(self, p, v):
        (p2, v2), single = self._batch(p, v)
        q = _backend.kernels.cc_exp(p2, v2, self.curv)
        return self._unbatch(self._normalize2(q), single)

    def dist(self, p, q):
        (p2, q2), single = self._batch(p, q)
        return self._unbatch(_backend.kernels.cc_dist(p2, q2, self.curv), single)

    def log(self, p, q):
        (p2, q2), single = self._batch(p, q)
        self._check_cut(p2, q2, "log")
        return self._unbatch(_backend.kernels.cc_log(p2, q2, self.curv), single)

    def transport(self, p, q, v):
        (p2, q2, v2), single = self._batch(p, q, v)
        self._check_cut(p2, q2, "transport")
        return self._unbatch(_backend.kernels.cc_transport(p2, q2, v2, self.curv), single)

    def adjoints(self, p, vx, yhat, e):
        (p2, vx2, y2, e2), single = self._batch(p, vx, yhat, e)
        dp, dv = _backend.kernels.cc_adjoint(p2, vx2, y2, e2, self.curv)
        return self._unbatch(dp, single), self._unbatch(dv, single)

    def normalize(self, p):
        (p2,), single = self._batch(p)
        return self._unbatch(self._normalize2(p2), single)

    def _check_cut(self, p2, q2, what):
        pass

    def tangent_frame(self, p):
        """Orthonormal frame of ``T_p`` as an array of shape ``(m, n, n+1)``.

        The standard frame at the base point ``(+-1, 0, ..., 0)`` is carried
        to ``p`` by parallel transport.
        """
        (p2,), single = self._batch(p)
        m, d = p2.shape
        base = np.zeros((m, d))
        base[:, 0] = self._frame_base_sign(p2)
        frame = np.empty((m, self.n, d))
        for j in range(self.n):
            e = np.zeros((m, d))
            e[:, j + 1] = 1.0
            frame[:, j, :] = _backend.kernels.cc_transport(base, p2, e, self.curv)
        return frame[0] if single else frame

    def _frame_base_sign(self, p2):
        return np.ones(p2.shape[0])

    def random_tangent(self, rng, p, scale=1.0):
        (p2,), single = self._batch(p)
        frame = self.tangent_frame(p2)
        z = rng.standard_normal((p2.shape[0], self.n))
        return self._unbatch(scale * np.einsum("mj,mjd->md", z, frame), single)


class Sphere(_ConstantCurvature):
    """Unit sphere ``S^n`` embedded in ``R^(n+1)``."""

    name = "sphere"
    curv = 1

    def _normalize2(self, q):
        return q / np.linalg.norm(q, axis=1, keepdims=True)

    def _check_cut(self, p2, q2, what):
        theta = _backend.kernels.cc_dist(p2, q2, 1)
        bad = np.flatnonzero(theta > math.pi - CUT_MARGIN)
        if bad.size:
            i = int(bad[0])
            raise CutLocusError(
                f"sphere {what}: points at angle {theta[i]:.9f} are (nearly) antipodal",
                index=i)

    def _frame_base_sign(self, p2):
        return np.where(p2[:, 0] >= 0.0, 1.0, -1.0)

    def project(self, p, v):
        (p2, v2), single = self._batch(p, v)
        out = v2 - np.einsum("ij,ij->i", p2, v2)[:, None] * p2
        return self._unbatch(out, single)

    def check_point(self, p, tol=1e-10):
        (p2,), _ = self._batch(p)
        return bool(np.all(np.abs(np.linalg.norm(p2, axis=1) - 1.0) <= tol))

    def extrinsic_mean(self, points):
        (pts,), _ = self._batch(points)
        m = pts.mean(axis=0)
        nrm = np.linalg.norm(m)
        if nrm < 1e-12:
            return pts[0].copy()
        return m / nrm

    def random_point(self, rng, size=None):
        shape = (self.ambient_dim,) if size is None else (size, self.ambient_dim)
        g = rng.standard_normal(shape)
        return g / np.linalg.norm(g, axis=-1, keepdims=True)


class Hyperbolic(_ConstantCurvature):
    """Hyperboloid model ``{<p,p>_M = -1, p[0] > 0}`` of ``H^n``."""

    name = "hyperbolic"
    curv = -1

    def _normalize2(self, q):
        q = q.copy()
        q[:, 0] = np.sqrt(1.0 + np.einsum("ij,ij->i", q[:, 1:], q[:, 1:]))
        return q

    def project(self, p, v):
        (p2, v2), single = self._batch(p, v)
        ip = np.einsum("ij,ij->i", p2, v2) - 2.0 * p2[:, 0] * v2[:, 0]
        return self._unbatch(v2 + ip[:, None] * p2, single)

    def check_point(self, p, tol=1e-10):
        (p2,), _ = self._batch(p)
        mink = np.einsum("ij,ij->i", p2, p2) - 2.0 * p2[:, 0] ** 2
        return bool(np.all(np.abs(mink + 1.0) <= tol) and np.all(p2[:, 0] > 0))

    def extrinsic_mean(self, points):
        (pts,), _ = self._batch(points)
        m = pts.mean(axis=0)
        mink = m @ m - 2.0 * m[0] ** 2
        return m / math.sqrt(-mink)

    def random_point(self, rng, size=None, scale=1.0):
        shape = (self.n,) if size is None else (size, self.n)
        z = scale * rng.standard_normal(shape)
        x0 = np.sqrt(1.0 + np.sum(z * z, axis=-1, keepdims=True))
        return np.concatenate([x0, z], axis=-1)

    def to_poincare(self, p):
        return poincare_from_hyperboloid(p)

    def from_poincare(self, q):
        return hyperboloid_from_poincare(q)


def poincare_from_hyperboloid(p):
    """Map hyperboloid points to the Poincare ball: ``p[1:] / (p[0] + 1)``."""
    p = np.asarray(p, dtype=float)
    return p[..., 1:] / (p[..., :1] + 1.0)


def hyperboloid_from_poincare(q):
    """Inverse of :func:`poincare_from_hyperboloid` for ``|q| < 1``."""
    q = np.asarray(q, dtype=float)
    r2 = np.sum(q * q, axis=-1, keepdims=True)
    if np.any(r2 >= 1.0):
        raise DomainError("Poincare ball points must have norm < 1")
    return np.concatenate([(1.0 + r2) / (1.0 - r2), 2.0 * q / (1.0 - r2)], axis=-1)
