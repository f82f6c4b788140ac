"""Tuning constants for the robust estimators.

Under a tangent-space normal approximation in ``n`` dimensions:

* ``xi(n)`` converts the median residual norm into a scale estimate,
  ``sigma_hat = MAD / xi``;
* ``are_huber``, ``are_tukey`` and ``are_l1`` give the asymptotic efficiency
  of each location estimator relative to least squares;
* ``solve_cutoff`` finds the Huber or Tukey cutoff (in units of sigma) that
  reaches a target efficiency, by bracketed Newton iteration.

All incomplete-gamma terms are divided by ``Gamma((n + 2) / 2)`` before they
are combined, so the efficiencies stay finite for large ``n``.
"""
import math
from dataclasses import asdict, dataclass
from functools import lru_cache

from .errors import ConvergenceError, DomainError
from .specfun import inv_reg_lower_gamma, reg_lower_gamma, reg_upper_gamma

__all__ = [
    "TuningResult",
    "are_huber",
    "are_huber_dc",
    "are_l1",
    "are_tukey",
    "are_tukey_dc",
    "huber_terms",
    "solve_cutoff",
    "tukey_terms",
    "tune",
    "xi",
]


def _check_n(n):
    if int(n) != n or n < 1:
        raise DomainError(f"dimension must be a positive integer, got {n}")
    return int(n)


def _check_c(c):
    c = float(c)
    if not math.isfinite(c) or c <= 0:
        raise DomainError(f"cutoff must be positive and finite, got {c}")
    return c


@lru_cache(maxsize=None)
def xi(n):
    """Median of the chi distribution with ``n`` degrees of freedom."""
    n = _check_n(n)
    return math.sqrt(2.0 * inv_reg_lower_gamma(0.5 * n, 0.5))


def are_l1(n):
    """Efficiency of the L1 (geometric median) estimator relative to L2."""
    n = _check_n(n)
    return math.exp(2.0 * math.lgamma(0.5 * (n + 1)) - math.lgamma(0.5 * n)
                    - math.lgamma(0.5 * (n + 2)))


class _Scaled:
    """Lower/upper incomplete gammas at ``x`` divided by ``Gamma(b)``."""

    def __init__(self, x, b):
        self.x = x
        self.lgb = math.lgamma(b)

    def lower(self, a):
        return reg_lower_gamma(a, self.x) * math.exp(math.lgamma(a) - self.lgb)

    def upper(self, a):
        return reg_upper_gamma(a, self.x) * math.exp(math.lgamma(a) - self.lgb)

    def pdf_term(self, c, n):
        """``2^(-n/2) c^(n-1) exp(-c^2/2) / Gamma(b)``."""
        return math.exp(-0.5 * n * math.log(2.0) + (n - 1) * math.log(c)
                        - self.x - self.lgb)


def huber_terms(c, n):
    """``(H1, H2, H3, H4)``, each divided by ``Gamma((n+2)/2)``.

    ``H1`` and ``H2`` are the Jacobian and score-variance expectations and
    ``H3 = dH1/dc``, ``H4 = dH2/dc``.  For ``n = 1`` the terms involving
    ``Gamma(0, x)`` carry a factor ``n - 1 = 0`` and are dropped.
    """
    c, n = _check_c(c), _check_n(n)
    x = 0.5 * c * c
    g = _Scaled(x, 0.5 * (n + 2))
    tail = 2.0 ** -1.5 * (n - 1) * g.upper(0.5 * (n - 1)) if n > 1 else 0.0
    h1 = 0.5 * n * g.lower(0.5 * n) + c * tail
    h2 = g.lower(0.5 * (n + 2)) + x * g.upper(0.5 * n)
    h3 = g.pdf_term(c, n) + tail
    h4 = c * g.upper(0.5 * n)
    return h1, h2, h3, h4


def tukey_terms(c, n):
    """``(T1, T2, T3, T4)`` for the biweight, each divided by ``Gamma((n+2)/2)``.

    ``T3`` and ``T4`` are the exact ``c``-derivatives; the density terms
    produced by differentiating the incomplete gammas cancel in both.
    """
    c, n = _check_c(c), _check_n(n)
    x = 0.5 * c * c
    g = _Scaled(x, 0.5 * (n + 2))
    ga = {k: g.lower(0.5 * (n + k)) for k in (0, 2, 4, 6, 8, 10)}
    c2 = c * c
    t1 = 2.0 * (n + 4) / c2 ** 2 * ga[4] - 2.0 * (n + 2) / c2 * ga[2] + 0.5 * n * ga[0]
    t2 = (ga[2] - 8.0 / c2 * ga[4] + 24.0 / c2 ** 2 * ga[6]
          - 32.0 / c2 ** 3 * ga[8] + 16.0 / c2 ** 4 * ga[10])
    t3 = -8.0 * (n + 4) / c ** 5 * ga[4] + 4.0 * (n + 2) / c ** 3 * ga[2]
    t4 = (16.0 / c ** 3 * ga[4] - 96.0 / c ** 5 * ga[6]
          + 192.0 / c ** 7 * ga[8] - 128.0 / c ** 9 * ga[10])
    return t1, t2, t3, t4


def _ratio(terms):
    a1, a2, _, _ = terms
    return a1 * a1 / a2


def _ratio_dc(terms):
    a1, a2, a3, a4 = terms
    return (2.0 * a1 * a3 * a2 - a1 * a1 * a4) / (a2 * a2)


def are_huber(c, n):
    """Approximate efficiency of the Huber estimator with cutoff ``c``."""
    return _ratio(huber_terms(c, n))


def are_huber_dc(c, n):
    return _ratio_dc(huber_terms(c, n))


def are_tukey(c, n):
    """Approximate efficiency of the Tukey biweight estimator with cutoff ``c``."""
    return _ratio(tukey_terms(c, n))


def are_tukey_dc(c, n):
    return _ratio_dc(tukey_terms(c, n))


_FUNCS = {
    "huber": (are_huber, are_huber_dc, 2.0),
    "tukey": (are_tukey, are_tukey_dc, 4.0),
}


@lru_cache(maxsize=None)
def solve_cutoff(kind, n, target=0.95, tol=1e-12, max_iter=200):
    """Cutoff ``c`` with ``A(c, n) = target`` for ``kind`` "huber" or "tukey".

    Newton iteration from ``c0 = 2 xi(n)`` (Huber) or ``4 xi(n)`` (Tukey),
    confined to a bracket that shrinks on every step; a Newton step leaving
    the bracket is replaced by bisection.
    """
    kind = kind.lower()
    if kind not in _FUNCS:
        raise DomainError(f"cutoffs exist for 'huber' and 'tukey', not {kind!r}")
    n = _check_n(n)
    target = float(target)
    floor = are_l1(n) if kind == "huber" else 0.0
    if not floor < target < 1.0:
        raise DomainError(f"target efficiency for {kind} must lie in ({floor:.6f}, 1)")
    area, darea, mult = _FUNCS[kind]

    c = mult * xi(n)
    lo, hi = 0.0, c
    while area(hi, n) < target:
        lo, hi = hi, 2.0 * hi
        if hi > 1e6:
            raise ConvergenceError(f"could not bracket the {kind} cutoff")
    for _ in range(max_iter):
        f = area(c, n) - target
        if abs(f) <= tol:
            return c
        if f < 0.0:
            lo = c
        else:
            hi = c
        d = darea(c, n)
        step = c - f / d if d > 0.0 else -1.0
        c = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 4.0 * 2.220446049250313e-16 * hi:
            return c
    raise ConvergenceError(f"{kind} cutoff did not converge in {max_iter} iterations")


@dataclass(frozen=True)
class TuningResult:
    n: int
    target: float
    xi: float
    c_huber: float
    c_tukey: float
    are_l1: float

    def to_dict(self):
        return asdict(self)


def tune(n, target=0.95):
    """All tuning constants for intrinsic dimension ``n``."""
    n = _check_n(n)
    return TuningResult(
        n=n, target=target, xi=xi(n),
        c_huber=solve_cutoff("huber", n, target),
        c_tukey=solve_cutoff("tukey", n, target),
        are_l1=are_l1(n))
