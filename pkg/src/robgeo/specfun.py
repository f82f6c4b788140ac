"""Gamma-family functions and the complex error function.

The incomplete gammas and ``erf`` are evaluated by the active kernel backend
(series or Lentz continued fraction for the gammas; a Weideman rational
approximation of the Faddeeva function plus a Taylor series near the origin
for ``erf``).  ``ln_gamma`` comes from :func:`math.lgamma`.
"""
import math
from statistics import NormalDist

import numpy as np

from . import _backend
from .errors import ConvergenceError, DomainError, StripError

ERF_STRIP = 30.0

__all__ = [
    "ERF_STRIP",
    "erf_complex",
    "erf_scaled",
    "inv_reg_lower_gamma",
    "ln_gamma",
    "lower_inc_gamma",
    "reg_lower_gamma",
    "reg_upper_gamma",
    "upper_inc_gamma",
]


def _check_a(a):
    a = float(a)
    if not math.isfinite(a) or a <= 0.0:
        raise DomainError(f"shape parameter must be positive and finite, got {a}")
    return a


def _check_z(z):
    z = float(z)
    if math.isnan(z) or z < 0.0:
        raise DomainError(f"argument must be nonnegative, got {z}")
    return z


def ln_gamma(a):
    """Natural log of the gamma function for ``a > 0``."""
    return math.lgamma(_check_a(a))


def _pq(a, z):
    return _backend.kernels.reg_gamma_pq(_check_a(a), _check_z(z))


def reg_lower_gamma(a, z):
    """Regularized lower incomplete gamma ``P(a, z)``."""
    return _pq(a, z)[0]


def reg_upper_gamma(a, z):
    """Regularized upper incomplete gamma ``Q(a, z)``."""
    return _pq(a, z)[1]


def lower_inc_gamma(a, z):
    """Lower incomplete gamma ``gamma(a, z) = int_0^z t^(a-1) e^(-t) dt``."""
    return _pq(a, z)[0] * math.exp(math.lgamma(_check_a(a)))


def upper_inc_gamma(a, z):
    """Upper incomplete gamma ``Gamma(a, z) = Gamma(a) - gamma(a, z)``.

    For ``z > a + 1`` the value comes straight from the continued fraction,
    so it keeps full relative accuracy deep in the tail.
    """
    return _pq(a, z)[1] * math.exp(math.lgamma(_check_a(a)))


def inv_reg_lower_gamma(a, p, max_iter=200):
    """Solve ``P(a, z) = p`` for ``z``.

    Newton steps on ``P`` kept inside a shrinking bracket, with bisection
    whenever Newton would leave it.  The starting point is the
    Wilson-Hilferty approximation.

    Raises
    ------
    ConvergenceError
        If the residual has not reached tolerance within ``max_iter`` steps.
    """
    a = _check_a(a)
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"probability must lie in (0, 1), got {p}")
    tol = 1e-12 * min(1.0, 2.0 * min(p, 1.0 - p))
    lga = math.lgamma(a)

    lo, hi = 0.0, max(a, 1.0)
    while reg_lower_gamma(a, hi) < p:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            raise ConvergenceError(f"could not bracket P^-1({a}, {p})")

    q = NormalDist().inv_cdf(p)
    h = 1.0 / (9.0 * a)
    z = a * (1.0 - h + q * math.sqrt(h)) ** 3
    # Near zero P(a, z) ~ z^a / Gamma(a + 1); for small a or p the root can
    # be many orders of magnitude below 1.
    log_small = (math.log(p) + math.lgamma(a + 1.0)) / a
    if log_small < -740.0:
        raise DomainError(f"P^-1({a}, {p}) lies below the smallest positive double")
    z_small = math.exp(log_small)
    if a < 1.0 or z_small < 0.1 * a:
        z = min(z_small, 0.5 * hi)
    if not lo < z < hi:
        z = 0.5 * (lo + hi)

    for _ in range(max_iter):
        f = reg_lower_gamma(a, z) - p
        if abs(f) <= tol:
            return z
        if f < 0.0:
            lo = z
        else:
            hi = z
        if hi - lo <= 4.0 * np.finfo(float).eps * hi:
            return z
        dens = math.exp(min((a - 1.0) * math.log(z) - z - lga, 700.0))
        step = z - f / dens if dens > 0.0 else lo - 1.0
        if lo < step < hi:
            z = step
        elif lo > 0.0 and hi > 4.0 * lo:
            z = math.sqrt(lo * hi)
        else:
            z = 0.5 * (lo + hi) if lo > 0.0 else 0.01 * z if z > 0 else 0.5 * hi
    raise ConvergenceError(f"P^-1({a}, {p}) did not converge in {max_iter} iterations")


def _split_complex(z):
    z = np.asarray(z)
    if not np.all(np.isfinite(z)):
        raise DomainError("erf arguments must be finite")
    x = np.real(z).astype(float)
    y = np.imag(z).astype(float)
    if np.any(np.abs(y) > ERF_STRIP):
        raise StripError(f"|Im z| exceeds the supported strip {ERF_STRIP}")
    return x, y


def erf_scaled(z, log_scale):
    """Return ``exp(log_scale) * erf(z)`` without forming ``erf(z)`` alone.

    Useful when ``erf(z)`` overflows but the scaled product does not, e.g.
    ``exp(-y**2) * erf(x + i*y)`` for large ``y``.
    """
    x, y = _split_complex(z)
    out = _backend.kernels.erf_scaled(x, y, np.asarray(log_scale, dtype=float))
    return out[()] if out.ndim == 0 else out


def erf_complex(z):
    """Error function of a complex argument with ``|Im z| <= 30``.

    Raises
    ------
    StripError
        Outside the working strip.
    OverflowError
        Inside the strip but ``|erf(z)|`` exceeds the double range (this
        happens for ``|Im z|`` above roughly 26.6 near the imaginary axis).
    """
    out = erf_scaled(z, 0.0)
    if not np.all(np.isfinite(out)):
        raise OverflowError("erf(z) is not representable in double precision")
    return complex(out) if np.ndim(out) == 0 else out
