"""Exact Riemannian normal distribution on ``S^n`` and ``H^n``.

The density is proportional to ``exp(-d(y, mu)^2 / (2 sigma^2))``.  In polar
coordinates about ``mu`` the radius has density proportional to
``sin(r)^(n-1) exp(-r^2 / 2 sigma^2)`` on ``[0, pi]`` (sphere) or
``sinh(r)^(n-1) exp(-r^2 / 2 sigma^2)`` on ``[0, inf)`` (hyperbolic space),
independent of a uniformly distributed direction.  Expanding the power of
``sin`` or ``sinh`` into exponentials gives closed-form antiderivatives in
terms of ``erf``: :func:`g_function` and :func:`h_function`.

Sampling draws the radius by inverting the radial CDF, a direction from a
normalized isotropic Gaussian in the tangent space, and applies ``Exp``.
"""
import math
from functools import lru_cache

import numpy as np

from . import _backend
from .errors import ConvergenceError, DomainError
from .manifolds import Hyperbolic, Sphere
from .specfun import ERF_STRIP, erf_scaled

__all__ = [
    "RiemannianNormal",
    "g_function",
    "h_function",
    "h_limit",
    "normalizing_constant",
    "radial_cdf",
    "radial_quantile",
    "sample",
    "sample_contaminated",
    "sample_tangent_t",
]

_TABLE_SIZE = 4097
_QUANTILE_TOL = 1e-12
_IMAG_TOL = 1e-9


def _terms(m, sigma2):
    m = int(m)
    if m < 0:
        raise DomainError(f"m must be nonnegative, got {m}")
    sigma2 = float(sigma2)
    if not sigma2 > 0:
        raise DomainError(f"sigma^2 must be positive, got {sigma2}")
    j = np.arange(m + 1)
    coef = np.array([math.comb(m, k) for k in j], dtype=float) * (-1.0) ** j
    a = math.sqrt(0.5 * sigma2) * (m - 2 * j)
    return m, sigma2, coef, a


def g_function(m, sigma2, R):
    """Antiderivative in ``R`` of ``sin(r)^m exp(-r^2 / (2 sigma2))``.

    Real-valued by construction; the imaginary roundoff is checked and
    dropped.  Requires ``sqrt(sigma2 / 2) * m <= 30``.
    """
    m, sigma2, coef, a = _terms(m, sigma2)
    R = np.asarray(R, dtype=float)
    z = R[..., None] / math.sqrt(2.0 * sigma2) + 1j * a
    total = (erf_scaled(z, -a * a) * coef).sum(axis=-1)
    val = (0.5j) ** m * math.sqrt(0.5 * math.pi * sigma2) * total
    if np.any(np.abs(val.imag) > _IMAG_TOL * np.maximum(1.0, np.abs(val.real))):
        raise ArithmeticError("G function has a non-negligible imaginary part")
    out = val.real
    return float(out) if out.ndim == 0 else out


def h_function(m, sigma2, R):
    """Antiderivative in ``R`` of ``sinh(r)^m exp(-r^2 / (2 sigma2))``."""
    m, sigma2, coef, a = _terms(m, sigma2)
    R = np.asarray(R, dtype=float)
    x = R[..., None] / math.sqrt(2.0 * sigma2) - a
    vals = _backend.kernels.erf_scaled(x, np.zeros_like(x), np.broadcast_to(a * a, x.shape)).real
    out = 2.0 ** -m * math.sqrt(0.5 * math.pi * sigma2) * (vals * coef).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def h_limit(m, sigma2):
    """``lim_{R -> inf} h_function(m, sigma2, R)``."""
    m, sigma2, coef, a = _terms(m, sigma2)
    return float(2.0 ** -m * math.sqrt(0.5 * math.pi * sigma2) * (np.exp(a * a) * coef).sum())


def _surface_area(n):
    """Area of the unit ``(n-1)``-sphere, ``2 pi^(n/2) / Gamma(n/2)``."""
    return 2.0 * math.exp(0.5 * n * math.log(math.pi) - math.lgamma(0.5 * n))


class RiemannianNormal:
    """Riemannian normal law with dispersion ``sigma`` on a sphere or hyperboloid.

    Only the radial part depends on ``sigma``; the location enters through
    :meth:`sample`.  Instances are immutable.
    """

    def __init__(self, manifold, sigma):
        if not isinstance(manifold, (Sphere, Hyperbolic)):
            raise DomainError("the Riemannian normal is available on Sphere and Hyperbolic only")
        sigma = float(sigma)
        if not sigma > 0:
            raise DomainError(f"sigma must be positive, got {sigma}")
        self.manifold = manifold
        self.sigma = sigma
        self.sigma2 = sigma * sigma
        self.m = manifold.n - 1
        self.spherical = isinstance(manifold, Sphere)
        if self.spherical:
            if self.m * sigma / math.sqrt(2.0) > ERF_STRIP:
                raise DomainError("(n-1) sigma / sqrt(2) exceeds the supported erf strip")
            self._anti = lambda r: g_function(self.m, self.sigma2, r)
            self._base = self._anti(0.0)
            self._mass = self._anti(math.pi) - self._base
            self.r_max = math.pi
        else:
            self._anti = lambda r: h_function(self.m, self.sigma2, r)
            self._base = self._anti(0.0)
            self._mass = h_limit(self.m, self.sigma2) - self._base
            self.r_max = self.m * self.sigma2 + 40.0 * sigma
        if not (math.isfinite(self._mass) and self._mass > 0):
            raise ArithmeticError("radial normalizer is not positive; sigma out of range")
        self._table = None

    def __repr__(self):
        return f"RiemannianNormal({self.manifold!r}, sigma={self.sigma})"

    @property
    def normalizing_constant(self):
        return _surface_area(self.manifold.n) * self._mass

    def radial_pdf(self, r):
        r = np.asarray(r, dtype=float)
        rc = np.clip(r, 0.0, self.r_max)
        shape = np.sin(rc) if self.spherical else np.sinh(rc)
        val = shape ** self.m * np.exp(-0.5 * rc * rc / self.sigma2) / self._mass
        val = np.where((r < 0) | (r > self.r_max), 0.0, val)
        return float(val) if val.ndim == 0 else val

    def radial_cdf(self, r):
        """``P(d(y, mu) <= r)``; 0 below the support, 1 above it."""
        r = np.asarray(r, dtype=float)
        rc = np.clip(r, 0.0, self.r_max)
        val = np.clip((self._anti(rc) - self._base) / self._mass, 0.0, 1.0)
        val = np.where(r <= 0, 0.0, np.where(r >= self.r_max, 1.0, val))
        return float(val) if val.ndim == 0 else val

    def _tabulate(self):
        if self._table is None:
            grid = np.linspace(0.0, self.r_max, _TABLE_SIZE)
            cdf = np.maximum.accumulate(self.radial_cdf(grid))
            cdf[0], cdf[-1] = 0.0, 1.0
            self._table = (grid, cdf)
        return self._table

    def radial_quantile(self, t, max_iter=100):
        """Inverse of :meth:`radial_cdf` to ``|F(r) - t| <= 1e-12``.

        A tabulated CDF supplies a bracket and a starting point by linear
        interpolation; Newton steps using the radial density refine it,
        falling back to bisection whenever a step would leave the bracket.
        """
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        if np.any((t < 0) | (t >= 1)) or not np.all(np.isfinite(t)):
            raise DomainError("quantile levels must lie in [0, 1)")
        grid, cdf = self._tabulate()
        idx = np.clip(np.searchsorted(cdf, t, side="right"), 1, len(grid) - 1)
        lo, hi = grid[idx - 1].copy(), grid[idx].copy()
        flo, fhi = cdf[idx - 1], cdf[idx]
        width = np.where(fhi > flo, fhi - flo, 1.0)
        r = lo + (hi - lo) * np.clip((t - flo) / width, 0.0, 1.0)
        r = np.where(t == 0, 0.0, r)
        active = t > 0
        for _ in range(max_iter):
            if not np.any(active):
                break
            ra = r[active]
            f = self.radial_cdf(ra) - t[active]
            close = np.abs(f) <= _QUANTILE_TOL
            la, ha = lo[active], hi[active]
            la = np.where(f < 0, ra, la)
            ha = np.where(f > 0, ra, ha)
            d = self.radial_pdf(ra)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = ra - f / d
            ok = np.isfinite(step) & (step > la) & (step < ha)
            new = np.where(ok, step, 0.5 * (la + ha))
            collapsed = ha - la <= 4.0 * np.finfo(float).eps * np.maximum(ha, 1.0)
            done = close | collapsed
            r[active] = np.where(done, ra, new)
            lo[active], hi[active] = la, ha
            active_idx = np.flatnonzero(active)
            active[active_idx[done]] = False
        if np.any(active):
            raise ConvergenceError("radial quantile did not converge")
        return float(r[0]) if scalar else r

    def sample(self, mu, rng, size=None):
        """Draw points around ``mu``.

        ``mu`` of shape ``(D,)`` gives ``size`` draws (one point if ``size``
        is None); ``mu`` of shape ``(m, D)`` gives one draw per row.
        """
        mu2, single = _locations(self.manifold, mu, size)
        count = mu2.shape[0]
        radius = self.radial_quantile(rng.random(count))
        return _finish(self.manifold, mu2, radius[:, None] * _directions(self.manifold, mu2, rng),
                       single)


def _locations(manifold, mu, size):
    mu = np.asarray(mu, dtype=float)
    if mu.ndim == 1:
        count = 1 if size is None else int(size)
        return np.broadcast_to(mu, (count, mu.shape[0])), size is None
    if size is not None and size != mu.shape[0]:
        raise DomainError("size must match the number of locations")
    return mu, False


def _directions(manifold, mu2, rng):
    """Uniform unit tangent vectors at each row of ``mu2``."""
    g = rng.standard_normal((mu2.shape[0], manifold.n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return _embed(manifold, mu2, g)


def _embed(manifold, mu2, coords):
    if np.all(mu2 == mu2[0]):
        frame = manifold.tangent_frame(mu2[0])
        return coords @ frame
    return np.einsum("mj,mjd->md", coords, manifold.tangent_frame(mu2))


def _finish(manifold, mu2, v, single):
    y = manifold.exp(np.ascontiguousarray(mu2), v)
    return y[0] if single else y


@lru_cache(maxsize=256)
def _law(manifold, sigma):
    return RiemannianNormal(manifold, sigma)


def normalizing_constant(manifold, sigma):
    """``C(sigma) = int exp(-d(y, mu)^2 / 2 sigma^2) dy``."""
    return _law(manifold, float(sigma)).normalizing_constant


def radial_cdf(manifold, sigma, r):
    return _law(manifold, float(sigma)).radial_cdf(r)


def radial_quantile(manifold, sigma, t):
    return _law(manifold, float(sigma)).radial_quantile(t)


def sample(manifold, mu, sigma, rng, size=None):
    """Riemannian normal draws; see :meth:`RiemannianNormal.sample`."""
    return _law(manifold, float(sigma)).sample(mu, rng, size)


def sample_tangent_t(manifold, mu, scale, nu, rng, size=None):
    """Multivariate t draws in the tangent space at ``mu``, mapped by ``Exp``.

    ``v = scale * z * sqrt(nu / chi2_nu)`` with ``z`` standard normal in an
    orthonormal tangent frame.  On the sphere, draws with ``|v| >= pi``
    would wrap past the antipode and are redrawn.
    """
    if not nu > 0:
        raise DomainError(f"degrees of freedom must be positive, got {nu}")
    mu2, single = _locations(manifold, mu, size)
    count = mu2.shape[0]
    coords = np.empty((count, manifold.n))
    todo = np.arange(count)
    while todo.size:
        z = rng.standard_normal((todo.size, manifold.n))
        w = rng.chisquare(nu, todo.size)
        draw = scale * z * np.sqrt(nu / w)[:, None]
        coords[todo] = draw
        if isinstance(manifold, Sphere):
            todo = todo[np.linalg.norm(draw, axis=1) >= math.pi]
        else:
            todo = todo[:0]
    return _finish(manifold, mu2, _embed(manifold, mu2, coords), single)


def sample_contaminated(manifold, mu, sigma_main, sigma_out, p_out, rng, size=None,
                        return_labels=False):
    """Two-component Riemannian normal mixture.

    Each draw comes from the ``sigma_out`` component with probability
    ``p_out`` and from the ``sigma_main`` component otherwise.
    """
    if not 0.0 <= p_out <= 1.0:
        raise DomainError(f"mixing probability must lie in [0, 1], got {p_out}")
    mu2, single = _locations(manifold, mu, size)
    count = mu2.shape[0]
    outlier = rng.random(count) < p_out
    t = rng.random(count)
    radius = np.empty(count)
    main, out = _law(manifold, float(sigma_main)), _law(manifold, float(sigma_out))
    if np.any(~outlier):
        radius[~outlier] = main.radial_quantile(t[~outlier])
    if np.any(outlier):
        radius[outlier] = out.radial_quantile(t[outlier])
    y = _finish(manifold, mu2, radius[:, None] * _directions(manifold, mu2, rng), single)
    return (y, outlier) if return_labels else y
