# cython: language_level=3
"""Compiled kernels; mirrors ``robgeo._pykernels`` function for function."""
import numpy as np
cimport numpy as cnp
from libc.math cimport (sqrt, exp, log, lgamma, sin, cos, sinh, cosh, atan2,
                        asinh, fabs, isinf)

cnp.import_array()

NAME = "cython"

cdef double _EPS = 2.220446049250313e-16
cdef double _FPMIN = 1e-300
cdef int _MAXIT = 10000
cdef double _SQRT_PI = 1.7724538509055159
cdef double _SERIES_RADIUS = 2.0
cdef int _SERIES_TERMS = 48
cdef int _W_TERMS = 40


# --------------------------------------------------------------------------
# incomplete gamma
# --------------------------------------------------------------------------

cdef double _prefactor(double a, double x) noexcept nogil:
    return exp(a * log(x) - x - lgamma(a))


def reg_gamma_pq(double a, double x):
    """Return ``(P(a, x), Q(a, x))``."""
    cdef double ap, term, total, p, q, b, c, d, h, an, delta
    cdef int i
    if x == 0.0:
        return 0.0, 1.0
    if isinf(x):
        return 1.0, 0.0
    if x < a + 1.0:
        ap = a
        term = 1.0 / a
        total = term
        for i in range(_MAXIT):
            ap += 1.0
            term *= x / ap
            total += term
            if fabs(term) < fabs(total) * _EPS:
                break
        else:
            raise ArithmeticError(f"gamma series did not converge (a={a}, x={x})")
        p = total * _prefactor(a, x)
        return p, 1.0 - p
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _MAXIT):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if fabs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if fabs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if fabs(delta - 1.0) < _EPS:
            break
    else:
        raise ArithmeticError(f"gamma continued fraction did not converge (a={a}, x={x})")
    q = h * _prefactor(a, x)
    return 1.0 - q, q


# --------------------------------------------------------------------------
# complex error function
# --------------------------------------------------------------------------

from robgeo._pykernels import W_SCALE as _PY_W_SCALE, W_COEFFS as _PY_W_COEFFS

cdef double W_SCALE = _PY_W_SCALE
cdef double[::1] W_COEFFS = np.ascontiguousarray(_PY_W_COEFFS, dtype=np.float64)


cdef double complex _faddeeva(double complex z) noexcept nogil:
    cdef double complex den = W_SCALE - 1j * z
    cdef double complex arg = (W_SCALE + 1j * z) / den
    cdef double complex poly = 0.0
    cdef int k
    for k in range(_W_TERMS):
        poly = poly * arg + W_COEFFS[k]
    return 2.0 * poly / (den * den) + (1.0 / _SQRT_PI) / den


def faddeeva_w(z):
    """Faddeeva function for ``Im z >= 0``."""
    cdef cnp.ndarray[complex, ndim=1] zz = np.ascontiguousarray(np.ravel(z), dtype=complex)
    cdef Py_ssize_t i, n = zz.shape[0]
    out = np.empty(n, dtype=complex)
    cdef double complex[::1] o = out
    for i in range(n):
        o[i] = _faddeeva(zz[i])
    return out.reshape(np.shape(z))


cdef double complex _erf_scaled(double x, double y, double ls) noexcept nogil:
    cdef bint flip = x < 0
    cdef bint conj
    cdef double complex z, z2, term, total, res, expo
    cdef int k
    if flip:
        x = -x
        y = -y
    conj = y < 0
    if conj:
        y = -y
    z = x + 1j * y
    if sqrt(x * x + y * y) < _SERIES_RADIUS:
        z2 = z * z
        term = z
        total = z
        for k in range(1, _SERIES_TERMS):
            term = term * (-z2) / k
            total = total + term / (2 * k + 1)
        res = exp(ls) * (2.0 / _SQRT_PI) * total
    else:
        expo = (ls - x * x + y * y) - 2j * x * y
        res = exp(ls) - _cexp(expo) * _faddeeva(1j * z)
    if conj:
        res = res.real - 1j * res.imag
    if flip:
        res = -res
    return res


cdef inline double complex _cexp(double complex w) noexcept nogil:
    cdef double m = exp(w.real)
    return m * cos(w.imag) + 1j * m * sin(w.imag)


def erf_scaled(x, y, log_scale):
    """Return ``exp(log_scale) * erf(x + i y)`` elementwise."""
    xb, yb, lb = np.broadcast_arrays(np.asarray(x, dtype=float),
                                     np.asarray(y, dtype=float),
                                     np.asarray(log_scale, dtype=float))
    shape = xb.shape
    cdef const double[::1] xs = np.ascontiguousarray(xb.ravel())
    cdef const double[::1] ys = np.ascontiguousarray(yb.ravel())
    cdef const double[::1] ls = np.ascontiguousarray(lb.ravel())
    cdef Py_ssize_t i, n = xs.shape[0]
    out = np.empty(n, dtype=complex)
    cdef double complex[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = _erf_scaled(xs[i], ys[i], ls[i])
    return out.reshape(shape)


# --------------------------------------------------------------------------
# constant-curvature geometry
# --------------------------------------------------------------------------

cdef inline double _ip(const double[:, ::1] a, Py_ssize_t i,
                       const double[:, ::1] b, Py_ssize_t j, int curv) noexcept nogil:
    cdef Py_ssize_t k, d = a.shape[1]
    cdef double s = 0.0
    for k in range(d):
        s += a[i, k] * b[j, k]
    if curv < 0:
        s -= 2.0 * a[i, 0] * b[j, 0]
    return s


cdef inline double _sin_over(double t, int curv) noexcept nogil:
    if t < 1e-7:
        return 1.0 - curv * t * t / 6.0
    if curv > 0:
        return sin(t) / t
    return sinh(t) / t


cdef inline double _cosc(double t, int curv) noexcept nogil:
    return cos(t) if curv > 0 else cosh(t)


def cc_inner(const double[:, ::1] a, const double[:, ::1] b, int curv):
    cdef Py_ssize_t i, m = a.shape[0]
    out = np.empty(m)
    cdef double[::1] o = out
    for i in range(m):
        o[i] = _ip(a, i, b, i, curv)
    return out


def cc_exp(const double[:, ::1] p, const double[:, ::1] v, int curv):
    cdef Py_ssize_t i, k, m = p.shape[0], d = p.shape[1]
    out = np.empty((m, d))
    cdef double[:, ::1] o = out
    cdef double th, cc, ss, nn
    with nogil:
        for i in range(m):
            nn = _ip(v, i, v, i, curv)
            th = sqrt(nn) if nn > 0 else 0.0
            cc = _cosc(th, curv)
            ss = _sin_over(th, curv)
            for k in range(d):
                o[i, k] = cc * p[i, k] + ss * v[i, k]
    return out


cdef inline double _angle_row(const double[:, ::1] p, const double[:, ::1] q,
                              Py_ssize_t i, int curv, double* u, double* s_out) noexcept nogil:
    cdef Py_ssize_t k, d = p.shape[1]
    cdef double c = _ip(p, i, q, i, curv)
    cdef double s = 0.0
    if curv < 0:
        c = -c
    for k in range(d):
        u[k] = q[i, k] - c * p[i, k]
        s += u[k] * u[k]
    if curv < 0:
        s -= 2.0 * u[0] * u[0]
    s = sqrt(s) if s > 0 else 0.0
    s_out[0] = s
    if curv > 0:
        return atan2(s, c)
    return asinh(s)


def cc_dist(const double[:, ::1] p, const double[:, ::1] q, int curv):
    cdef Py_ssize_t i, m = p.shape[0], d = p.shape[1]
    out = np.empty(m)
    cdef double[::1] o = out
    cdef double[::1] u = np.empty(d)
    cdef double s
    with nogil:
        for i in range(m):
            o[i] = _angle_row(p, q, i, curv, &u[0], &s)
    return out


def cc_log(const double[:, ::1] p, const double[:, ::1] q, int curv):
    cdef Py_ssize_t i, k, m = p.shape[0], d = p.shape[1]
    out = np.empty((m, d))
    cdef double[:, ::1] o = out
    cdef double[::1] u = np.empty(d)
    cdef double s = 0.0, th, ratio
    with nogil:
        for i in range(m):
            th = _angle_row(p, q, i, curv, &u[0], &s)
            if s < 1e-7:
                ratio = 1.0 + curv * th * th / 6.0
            else:
                ratio = th / s
            for k in range(d):
                o[i, k] = ratio * u[k]
    return out


cdef inline void _transport_row(const double[:, ::1] p, Py_ssize_t ip,
                                const double[:, ::1] q, Py_ssize_t iq,
                                const double[:, ::1] v, Py_ssize_t iv,
                                int curv, double* out) noexcept nogil:
    cdef Py_ssize_t k, d = p.shape[1]
    cdef double coef = -curv * _ip(q, iq, v, iv, curv) / (1.0 + curv * _ip(p, ip, q, iq, curv))
    for k in range(d):
        out[k] = v[iv, k] + coef * (p[ip, k] + q[iq, k])


def cc_transport(const double[:, ::1] p, const double[:, ::1] q,
                 const double[:, ::1] v, int curv):
    """Parallel transport of ``v`` (tangent at ``p``) to ``q``."""
    cdef Py_ssize_t i, m = p.shape[0], d = p.shape[1]
    out = np.empty((m, d))
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(m):
            _transport_row(p, i, q, i, v, i, curv, &o[i, 0])
    return out


def cc_adjoint(const double[:, ::1] p, const double[:, ::1] vx,
               const double[:, ::1] yhat, const double[:, ::1] e, int curv):
    """Adjoint derivatives of Exp(p, vx) applied to ``e``; returns (dp, dv)."""
    cdef Py_ssize_t i, k, m = p.shape[0], d = p.shape[1]
    dp = np.empty((m, d))
    dv = np.empty((m, d))
    cdef double[:, ::1] odp = dp
    cdef double[:, ::1] odv = dv
    cdef double[::1] t = np.empty(d)
    cdef double nn, th, along, cc, ss, top
    with nogil:
        for i in range(m):
            _transport_row(yhat, i, p, i, e, i, curv, &t[0])
            nn = _ip(vx, i, vx, i, curv)
            th = sqrt(nn) if nn > 0 else 0.0
            along = 0.0
            if th > 0:
                for k in range(d):
                    along += t[k] * vx[i, k]
                if curv < 0:
                    along -= 2.0 * t[0] * vx[i, 0]
                along /= th
            cc = _cosc(th, curv)
            ss = _sin_over(th, curv)
            for k in range(d):
                top = along * vx[i, k] / th if th > 0 else 0.0
                odp[i, k] = cc * (t[k] - top) + top
                odv[i, k] = ss * (t[k] - top) + top
    return dp, dv
