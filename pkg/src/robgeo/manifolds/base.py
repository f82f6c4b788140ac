"""Common interface for manifold backends.

Points and tangent vectors are plain numpy arrays in ambient coordinates.
Every operation accepts either single vectors of shape ``(D,)`` or batches of
shape ``(m, D)``; mixed inputs broadcast along the batch axis.  A result is
unbatched only when every input was a single vector.
"""
import numpy as np

from ..errors import ManifoldMismatchError

PROJECTION_TOL = 1e-8


class Manifold:
    """Abstract manifold with exp, log, transport and Jacobi-field adjoints."""

    name = "manifold"
    dtype = np.float64

    @property
    def dim(self):
        """Intrinsic (real) dimension."""
        raise NotImplementedError

    @property
    def ambient_dim(self):
        raise NotImplementedError

    def tag(self):
        return {"kind": self.name, "dim": self.dim}

    def __repr__(self):
        return f"{type(self).__name__}({self._param()})"

    def _param(self):
        return self.dim

    def __eq__(self, other):
        return type(self) is type(other) and self._param() == other._param()

    def __hash__(self):
        return hash((type(self).__name__, self._param()))

    # ------------------------------------------------------------------
    # batching helpers
    # ------------------------------------------------------------------
    def _batch(self, *arrays):
        D = self.ambient_dim
        arrs = [np.asarray(a, dtype=self.dtype) for a in arrays]
        single = True
        m = 1
        for a in arrs:
            if a.ndim not in (1, 2) or a.shape[-1] != D:
                raise ManifoldMismatchError(
                    f"{self!r} expects arrays with trailing size {D}, got shape {a.shape}")
            if a.ndim == 2:
                single = False
                if a.shape[0] != 1:
                    if m not in (1, a.shape[0]):
                        raise ManifoldMismatchError(
                            f"incompatible batch sizes {m} and {a.shape[0]}")
                    m = a.shape[0]
        out = []
        for a in arrs:
            if a.ndim == 2 and a.shape[0] == m:
                out.append(a if a.flags.c_contiguous else np.ascontiguousarray(a))
            else:
                out.append(np.repeat(a.reshape(1, D), m, axis=0))
        return out, single

    @staticmethod
    def _unbatch(value, single):
        if single:
            return value[0]
        return value

    # ------------------------------------------------------------------
    # interface
    # ------------------------------------------------------------------
    def inner(self, u, v):
        """Real Riemannian inner product of tangent vectors (same base)."""
        raise NotImplementedError

    def norm(self, v):
        return np.sqrt(np.maximum(self.inner(v, v), 0.0))

    def exp(self, p, v):
        raise NotImplementedError

    def log(self, p, q):
        raise NotImplementedError

    def dist(self, p, q):
        raise NotImplementedError

    def transport(self, p, q, v):
        """Parallel transport of ``v`` in ``T_p`` along the geodesic to ``q``."""
        raise NotImplementedError

    def adjoints(self, p, vx, yhat, e):
        """Return ``(dExp_p^dag e, dExp_v^dag e)`` at ``p``.

        ``yhat = Exp(p, vx)`` and ``e`` is tangent at ``yhat``.
        """
        raise NotImplementedError

    def project(self, p, v):
        """Orthogonal projection of an ambient vector onto ``T_p``."""
        raise NotImplementedError

    def normalize(self, p):
        """Pull an approximately valid point back onto the manifold."""
        raise NotImplementedError

    def check_point(self, p, tol=1e-10):
        raise NotImplementedError

    def extrinsic_mean(self, points):
        """Cheap starting value for the intrinsic mean."""
        raise NotImplementedError

    def random_point(self, rng, size=None):
        raise NotImplementedError

    def random_tangent(self, rng, p, scale=1.0):
        """Tangent vector at ``p`` with standard normal coordinates times ``scale``."""
        (p2,), single = self._batch(p)
        g = rng.standard_normal(p2.shape)
        if np.iscomplexobj(p2):
            g = g + 1j * rng.standard_normal(p2.shape)
        return self._unbatch(scale * self.project(p2, g), single)

    # ------------------------------------------------------------------
    # conveniences built on the interface
    # ------------------------------------------------------------------
    def zero_tangent(self, p):
        return np.zeros_like(np.asarray(p, dtype=self.dtype))

    def tangent_residual(self, p, v):
        """Size of the normal component of ``v`` at ``p``."""
        p2, v2 = self._batch(p, v)[0]
        return np.linalg.norm(v2 - self.project(p2, v2), axis=-1)

    def reproject(self, p, v, tol=PROJECTION_TOL):
        """Project ``v`` onto ``T_p`` after asserting it was already close.

        Drift from floating-point arithmetic is removed; a residual larger
        than ``tol`` relative to ``max(1, |v|)`` signals a logic error.
        """
        (p2, v2), single = self._batch(p, v)
        proj = self.project(p2, v2)
        resid = np.linalg.norm(v2 - proj, axis=-1)
        scale = np.maximum(1.0, np.linalg.norm(v2, axis=-1))
        if np.any(resid > tol * scale):
            worst = int(np.argmax(resid / scale))
            raise AssertionError(
                f"tangent projection residual {resid[worst]:.3e} exceeds {tol:g}")
        return self._unbatch(proj, single)

    def geodesic(self, p, v, t):
        """Points ``Exp(p, t_i v)`` for an array of times ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        v = np.asarray(v, dtype=self.dtype)
        return self.exp(np.broadcast_to(p, (t.size, self.ambient_dim)),
                        t[:, None] * v[None, :])

    def adjoint_dexp_p(self, p, V, x, e):
        """``d_p Exp(p, V x)^dag e`` for covariates ``x`` (one or many rows)."""
        vx, yhat = self._predict(p, V, x)
        return self.adjoints(p, vx, yhat, e)[0]

    def adjoint_dexp_v(self, p, V, x, e):
        """``d_v Exp(p, V x)^dag e``."""
        vx, yhat = self._predict(p, V, x)
        return self.adjoints(p, vx, yhat, e)[1]

    def _predict(self, p, V, x):
        V = np.asarray(V, dtype=self.dtype).reshape(-1, self.ambient_dim)
        x = np.asarray(x, dtype=float)
        vx = x @ V
        return vx, self.exp(p, vx)
