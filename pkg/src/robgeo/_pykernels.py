"""Pure numpy implementation of the numerical kernels.

This module is the reference fallback for ``robgeo._ckernels``; both expose
the same functions with the same signatures, and ``robgeo._backend`` picks
one at import time.

Geometry kernels work on 2-D float64 arrays of shape ``(m, d)`` (one row per
point or tangent vector) and take ``curv = +1`` for the unit sphere and
``curv = -1`` for the hyperboloid model of hyperbolic space.
"""
import math

import numpy as np

NAME = "python"

_EPS = 2.220446049250313e-16
_FPMIN = 1e-300
_MAXIT = 10_000
_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)
_SERIES_RADIUS = 2.0
_SERIES_TERMS = 48
_W_TERMS = 40


# --------------------------------------------------------------------------
# incomplete gamma
# --------------------------------------------------------------------------

def _gamma_prefactor(a, x):
    return math.exp(a * math.log(x) - x - math.lgamma(a))


def reg_gamma_pq(a, x):
    """Return ``(P(a, x), Q(a, x))``, the regularized incomplete gammas.

    Series for ``x < a + 1``; Lentz continued fraction for the upper tail
    otherwise.
    """
    a = float(a)
    x = float(x)
    if x == 0.0:
        return 0.0, 1.0
    if math.isinf(x):
        return 1.0, 0.0
    if x < a + 1.0:
        ap = a
        term = 1.0 / a
        total = term
        for _ in range(_MAXIT):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * _EPS:
                break
        else:
            raise ArithmeticError(f"gamma series did not converge (a={a}, x={x})")
        p = total * _gamma_prefactor(a, x)
        return p, 1.0 - p
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _MAXIT):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    else:
        raise ArithmeticError(f"gamma continued fraction did not converge (a={a}, x={x})")
    q = h * _gamma_prefactor(a, x)
    return 1.0 - q, q


# --------------------------------------------------------------------------
# complex error function
# --------------------------------------------------------------------------

def _weideman_coefficients(n):
    m = 2 * n
    k = np.arange(-m + 1, m)
    ell = math.sqrt(n / math.sqrt(2.0))
    t = ell * np.tan(0.5 * k * math.pi / m)
    f = np.concatenate(([0.0], np.exp(-t * t) * (ell * ell + t * t)))
    a = np.real(np.fft.fft(np.fft.fftshift(f))) / (2 * m)
    return ell, np.ascontiguousarray(a[1:n + 1][::-1])


W_SCALE, W_COEFFS = _weideman_coefficients(_W_TERMS)


def faddeeva_w(z):
    """Faddeeva function ``w(z) = exp(-z^2) erfc(-iz)`` for ``Im z >= 0``."""
    z = np.asarray(z, dtype=complex)
    den = W_SCALE - 1j * z
    poly = np.polyval(W_COEFFS, (W_SCALE + 1j * z) / den)
    return 2.0 * poly / (den * den) + (1.0 / math.sqrt(math.pi)) / den


def _erf_series(z):
    z2 = z * z
    term = z.copy()
    total = z.copy()
    for k in range(1, _SERIES_TERMS):
        term = term * (-z2) / k
        total = total + term / (2 * k + 1)
    return _TWO_OVER_SQRT_PI * total


def erf_scaled(x, y, log_scale):
    """Return ``exp(log_scale) * erf(x + i y)`` elementwise.

    The scale is folded into the exponent before evaluation, so products such
    as ``exp(-y^2) erf(x + i y)`` stay finite for large ``|y|`` even though
    ``erf`` itself overflows there.
    """
    x, y, ls = np.broadcast_arrays(
        np.asarray(x, dtype=float), np.asarray(y, dtype=float),
        np.asarray(log_scale, dtype=float))
    flip = x < 0
    xr = np.where(flip, -x, x)
    yr = np.where(flip, -y, y)
    conj = yr < 0
    yr = np.abs(yr)
    z = xr + 1j * yr
    out = np.empty(z.shape, dtype=complex)
    small = np.abs(z) < _SERIES_RADIUS
    if np.any(small):
        out[small] = np.exp(ls[small]) * _erf_series(z[small])
    big = ~small
    if np.any(big):
        zb = z[big]
        xb, yb, lb = xr[big], yr[big], ls[big]
        wv = faddeeva_w(1j * zb)
        expo = (lb - xb * xb + yb * yb) - 2j * xb * yb
        out[big] = np.exp(lb) - np.exp(expo) * wv
    out = np.where(conj, np.conj(out), out)
    return np.where(flip, -out, out)


# --------------------------------------------------------------------------
# constant-curvature geometry (sphere: curv=+1, hyperboloid: curv=-1)
# --------------------------------------------------------------------------

def cc_inner(a, b, curv):
    s = np.einsum("ij,ij->i", a, b)
    if curv < 0:
        s = s - 2.0 * a[:, 0] * b[:, 0]
    return s


def _sin_over(theta, curv):
    """sin(t)/t (curv>0) or sinh(t)/t (curv<0), with the t->0 series."""
    small = theta < 1e-7
    safe = np.where(small, 1.0, theta)
    if curv > 0:
        val = np.sin(safe) / safe
        return np.where(small, 1.0 - theta * theta / 6.0, val)
    val = np.sinh(safe) / safe
    return np.where(small, 1.0 + theta * theta / 6.0, val)


def _cos(theta, curv):
    return np.cos(theta) if curv > 0 else np.cosh(theta)


def _norm(v, curv):
    return np.sqrt(np.maximum(cc_inner(v, v, curv), 0.0))


def cc_exp(p, v, curv):
    theta = _norm(v, curv)
    return _cos(theta, curv)[:, None] * p + _sin_over(theta, curv)[:, None] * v


def _angle(p, q, curv):
    c = cc_inner(p, q, curv)
    if curv > 0:
        u = q - c[:, None] * p
        s = np.sqrt(np.maximum(np.einsum("ij,ij->i", u, u), 0.0))
        theta = np.arctan2(s, c)
    else:
        c = -c
        u = q - c[:, None] * p
        s = _norm(u, curv)
        theta = np.arcsinh(s)
    return theta, s, u


def cc_dist(p, q, curv):
    return _angle(p, q, curv)[0]


def cc_log(p, q, curv):
    theta, s, u = _angle(p, q, curv)
    small = s < 1e-7
    ratio = np.where(small, 1.0 + curv * theta * theta / 6.0,
                     theta / np.where(small, 1.0, s))
    return ratio[:, None] * u


def cc_transport(p, q, v, curv):
    """Parallel transport of ``v`` (tangent at ``p``) to ``q``."""
    coef = -curv * cc_inner(q, v, curv) / (1.0 + curv * cc_inner(p, q, curv))
    return v + coef[:, None] * (p + q)


def cc_adjoint(p, vx, yhat, e, curv):
    """Adjoint derivatives of Exp(p, vx) applied to ``e`` (tangent at yhat).

    Returns ``(dp, dv)`` tangent at ``p``: the adjoints with respect to the
    base point and to the velocity.
    """
    t = cc_transport(yhat, p, e, curv)
    theta = _norm(vx, curv)
    nz = theta > 0
    unit = vx / np.where(nz, theta, 1.0)[:, None]
    along = np.where(nz, cc_inner(t, unit, curv), 0.0)
    top = along[:, None] * unit
    perp = t - top
    dp = _cos(theta, curv)[:, None] * perp + top
    dv = _sin_over(theta, curv)[:, None] * perp + top
    return dp, dv
