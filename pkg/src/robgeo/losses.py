"""M-type loss functions on nonnegative residual norms.

For a residual norm ``r`` each loss provides ``rho(r)``, its derivative
``psi(r) = rho'(r)`` and the gradient weight ``w(r) = psi(r) / r``.
"""
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError

KINDS = ("l2", "l1", "huber", "tukey")

# The L1 weight 1/r is capped at 1/L1_DELTA near zero residuals.
L1_DELTA = 1e-10


@dataclass(frozen=True)
class LossSpec:
    """Estimator kind plus, for Huber and Tukey, the cutoff ``c``."""

    kind: str
    cutoff: float | None = None

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in KINDS:
            raise DomainError(f"unknown loss {self.kind!r}; choose from {KINDS}")
        object.__setattr__(self, "kind", kind)
        if kind in ("huber", "tukey"):
            if self.cutoff is None or not np.isfinite(self.cutoff) or self.cutoff <= 0:
                raise DomainError(f"{kind} loss needs a positive cutoff, got {self.cutoff}")
            object.__setattr__(self, "cutoff", float(self.cutoff))
        elif self.cutoff is not None:
            raise DomainError(f"{kind} loss takes no cutoff")

    @property
    def robust_scaled(self):
        """Whether the cutoff is tied to a robust scale estimate."""
        return self.kind in ("huber", "tukey")

    def with_cutoff(self, c):
        return replace(self, cutoff=c)

    def rho(self, t):
        return rho(self, t)

    def psi(self, t):
        return psi(self, t)

    def weight(self, r):
        return weight(self, r)


def _nonneg(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("loss functions take nonnegative residual norms")
    return t


def _out(value, t):
    return float(value) if np.ndim(t) == 0 else value


def rho(spec, t):
    """Loss value ``rho(t)`` for ``t >= 0``."""
    t = _nonneg(t)
    kind, c = spec.kind, spec.cutoff
    if kind == "l2":
        val = 0.5 * t * t
    elif kind == "l1":
        val = t.copy()
    elif kind == "huber":
        val = np.where(t < c, 0.5 * t * t, c * (t - 0.5 * c))
    else:
        u = np.minimum(t / c, 1.0)
        val = (c * c / 6.0) * (1.0 - (1.0 - u * u) ** 3)
    return _out(val, t)


def psi(spec, t):
    """Derivative ``rho'(t)``; the L1 value at ``t = 0`` is taken as 0."""
    t = _nonneg(t)
    kind, c = spec.kind, spec.cutoff
    if kind == "l2":
        val = t.copy()
    elif kind == "l1":
        val = np.where(t > 0, 1.0, 0.0)
    elif kind == "huber":
        val = np.minimum(t, c)
    else:
        u = np.minimum(t / c, 1.0)
        val = t * (1.0 - u * u) ** 2
    return _out(val, t)


def weight(spec, r):
    """Gradient weight ``rho'(r) / r`` with its limits at ``r = 0``."""
    r = _nonneg(r)
    kind, c = spec.kind, spec.cutoff
    if kind == "l2":
        val = np.ones_like(r)
    elif kind == "l1":
        val = 1.0 / np.maximum(r, L1_DELTA)
    elif kind == "huber":
        val = np.where(r <= c, 1.0, c / np.where(r > 0, r, 1.0))
    else:
        u = np.minimum(r / c, 1.0)
        val = (1.0 - u * u) ** 2
    return _out(val, r)
