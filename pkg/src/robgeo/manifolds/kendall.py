"""Kendall's planar shape space of ``K`` landmarks.

Shapes are represented by pre-shapes: complex ``K``-vectors with zero sum and
unit norm.  Every operation works on the concrete representative it is given,
so a fit must keep one representative per point throughout.  Tangent vectors
at ``z`` are horizontal: zero sum and ``<z, v> = 0`` as complex numbers.

The complex inner product is ``<a, b> = sum(a * conj(b))`` and the metric is
its real part.
"""
import numpy as np

from ..errors import CutLocusError, DegenerateShapeError, DomainError
from .base import Manifold

# |<z1, z2>| below this means the shapes are (nearly) orthogonal and the
# optimal rotation between them is undefined.
ORTHOGONAL_TOL = 1e-9
_SMALL = 1e-7


def herm(a, b):
    """Row-wise complex inner product ``sum(a * conj(b))``."""
    return np.einsum("ij,ij->i", a, np.conj(b))


def _sinc(t):
    small = t < _SMALL
    safe = np.where(small, 1.0, t)
    return np.where(small, 1.0 - t * t / 6.0, np.sin(safe) / safe)


def preshape(landmarks):
    """Remove translation and scale from a landmark configuration.

    ``landmarks`` is either a complex ``(K,)`` vector, a real ``(K, 2)``
    matrix, or a stack of either.
    """
    z = as_complex(landmarks)
    single = z.ndim == 1
    z = np.atleast_2d(z)
    z = z - z.mean(axis=1, keepdims=True)
    nrm = np.linalg.norm(z, axis=1)
    if np.any(nrm < 1e-12):
        raise DegenerateShapeError("landmarks are all coincident")
    z = z / nrm[:, None]
    return z[0] if single else z


def as_complex(landmarks):
    a = np.asarray(landmarks)
    if np.iscomplexobj(a):
        return a.astype(complex)
    if a.shape[-1] != 2 or a.ndim < 2:
        raise DomainError("real landmark arrays must have shape (..., K, 2)")
    return a[..., 0] + 1j * a[..., 1]


def as_real(z):
    """Complex landmarks to a real ``(..., K, 2)`` array."""
    z = np.asarray(z)
    return np.stack([z.real, z.imag], axis=-1)


def align(z1, z2):
    """Rotate ``z2`` so that ``<z1, z2>`` is real and positive."""
    a = np.atleast_2d(np.asarray(z1, dtype=complex))
    b = np.atleast_2d(np.asarray(z2, dtype=complex))
    h = herm(a, b)
    r = np.abs(h)
    if np.any(r < ORTHOGONAL_TOL):
        i = int(np.argmin(r))
        raise CutLocusError("pre-shapes are orthogonal; rotation is undefined", index=i)
    out = b * (h / r)[:, None]
    return out[0] if np.ndim(z1) == 1 and np.ndim(z2) == 1 else out


class KendallShape(Manifold):
    """Kendall shape space ``Sigma_2^K`` of real dimension ``2K - 4``."""

    name = "kendall"
    dtype = np.complex128

    def __init__(self, k):
        k = int(k)
        if k < 3:
            raise DomainError(f"need at least 3 landmarks, got {k}")
        self.k = k

    @property
    def dim(self):
        return 2 * self.k - 4

    @property
    def ambient_dim(self):
        return self.k

    def _param(self):
        return self.k

    def tag(self):
        return {"kind": self.name, "dim": self.dim, "landmarks": self.k}

    def inner(self, u, v):
        (u2, v2), single = self._batch(u, v)
        return self._unbatch(herm(u2, v2).real, single)

    def project(self, p, v):
        (p2, v2), single = self._batch(p, v)
        v2 = v2 - v2.mean(axis=1, keepdims=True)
        v2 = v2 - herm(v2, p2)[:, None] * p2
        return self._unbatch(v2, single)

    def normalize(self, p):
        (p2,), single = self._batch(p)
        return self._unbatch(preshape(p2), single)

    def check_point(self, p, tol=1e-10):
        (p2,), _ = self._batch(p)
        return bool(np.all(np.abs(p2.sum(axis=1)) <= tol)
                    and np.all(np.abs(np.linalg.norm(p2, axis=1) - 1.0) <= tol))

    def exp(self, p, v):
        (p2, v2), single = self._batch(p, v)
        theta = np.linalg.norm(v2, axis=1)
        q = np.cos(theta)[:, None] * p2 + _sinc(theta)[:, None] * v2
        return self._unbatch(preshape(q), single)

    def _polar(self, p2, q2, what):
        """Aligned representative of ``q`` with its distance data."""
        h = herm(q2, p2)
        r = np.abs(h)
        bad = np.flatnonzero(r < ORTHOGONAL_TOL)
        if bad.size:
            raise CutLocusError(f"kendall {what}: shapes are at maximal distance",
                                index=int(bad[0]))
        phase = np.conj(h) / r
        qs = q2 * phase[:, None]
        u = qs - r[:, None] * p2
        s = np.linalg.norm(u, axis=1)
        return phase, qs, r, u, s

    def dist(self, p, q):
        (p2, q2), single = self._batch(p, q)
        r = np.abs(herm(p2, q2))
        u = q2 * (herm(p2, q2) / np.where(r > 0, r, 1.0))[:, None] - r[:, None] * p2
        s = np.linalg.norm(u, axis=1)
        return self._unbatch(np.arctan2(s, r), single)

    def log(self, p, q):
        (p2, q2), single = self._batch(p, q)
        _, _, r, u, s = self._polar(p2, q2, "log")
        theta = np.arctan2(s, r)
        ratio = np.where(s < _SMALL, 1.0 + theta * theta / 6.0,
                         theta / np.where(s < _SMALL, 1.0, s))
        return self._unbatch(ratio[:, None] * u, single)

    def transport(self, p, q, v):
        """Parallel transport from ``p`` to the representative ``q``.

        The horizontal geodesic from ``p`` to the aligned copy of ``q`` lies
        in the complex plane spanned by ``p`` and the unit horizontal
        direction ``t``.  Transport rotates that plane by the geodesic angle,
        fixes its orthogonal complement, and finally rotates the result onto
        the representative ``q`` that was passed in.
        """
        (p2, q2, v2), single = self._batch(p, q, v)
        phase, _, r, u, s = self._polar(p2, q2, "transport")
        moving = s > 0.0
        t = u / np.where(moving, s, 1.0)[:, None]
        a = herm(v2, p2)
        b = np.where(moving, herm(v2, t), 0.0)
        out = (v2 + ((r - 1.0) * a - s * b)[:, None] * p2
               + (s * a + (r - 1.0) * b)[:, None] * t)
        out = out * np.conj(phase)[:, None]
        return self._unbatch(out, single)

    def adjoints(self, p, vx, yhat, e):
        """Jacobi-field adjoints on the shape space.

        The transported residual is split along ``i*vx`` (holomorphic
        curvature 4: angle doubled) and the rest, which is split again along
        ``vx`` itself (no curvature effect) and orthogonal to it (curvature 1).
        """
        (p2, vx2, y2, e2), single = self._batch(p, vx, yhat, e)
        t = self.transport(y2, p2, e2)
        theta = np.linalg.norm(vx2, axis=1)
        nz = theta > 0.0
        unit = vx2 / np.where(nz, theta, 1.0)[:, None]
        junit = 1j * unit
        w = np.where(nz, herm(t, junit).real, 0.0)[:, None] * junit
        u = t - w
        top = np.where(nz, herm(u, unit).real, 0.0)[:, None] * unit
        perp = u - top
        dp = np.cos(theta)[:, None] * perp + np.cos(2 * theta)[:, None] * w + top
        dv = _sinc(theta)[:, None] * perp + _sinc(2 * theta)[:, None] * w + top
        return self._unbatch(dp, single), self._unbatch(dv, single)

    def extrinsic_mean(self, points):
        """Full Procrustes mean: leading eigenvector of ``sum z z^*``."""
        (pts,), _ = self._batch(points)
        s = pts.T @ np.conj(pts)
        _, vecs = np.linalg.eigh(s)
        mu = vecs[:, -1]
        # Pick the phase that best matches the first observation.
        h = np.vdot(pts[0], mu)
        if abs(h) > 0:
            mu = mu * (np.conj(h) / abs(h))
        return preshape(mu)

    def random_point(self, rng, size=None):
        shape = (self.k,) if size is None else (size, self.k)
        return preshape(rng.standard_normal(shape) + 1j * rng.standard_normal(shape))

    def rotate(self, z, angle):
        """Another representative of the same shape: ``z * exp(i*angle)``."""
        return np.asarray(z, dtype=complex) * np.exp(1j * np.asarray(angle, dtype=float))[..., None]
