"""Geodesic regression with M-type losses.

The model is ``y = Exp(Exp(p, V x), eps)`` with intercept ``p`` and one
tangent vector at ``p`` per covariate.  :func:`fit` runs gradient descent
with an adaptive step: a trial step is accepted when it does not increase
the loss, after which the step doubles (capped so that ``p`` moves at most
``lambda_max``); otherwise it halves.  For Huber and Tukey the cutoff is
``c = c_kind * MAD / xi`` and is refreshed after each accepted step.

Once two losses differ by less than their rounding error the comparison
carries no information, so such a step is judged by whether it shrinks the
gradient norm.  With ``tol_rel=0`` the solver runs until the gradient
reaches its own rounding level or the step underflows.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from . import tuning
from .errors import ConvergenceError, DomainError, ManifoldMismatchError
from .losses import KINDS, LossSpec

__all__ = [
    "FitResult",
    "GeodesicModel",
    "SolverConfig",
    "fit",
    "frechet_variance",
    "gradients",
    "intrinsic_mean",
    "loss_value",
    "mse_pair",
    "residuals",
]

LAMBDA_MIN = 1e-15
MEAN_TOL = 1e-10
# Loss changes within this many ulps of the loss are treated as ties.
ROUNDING_BAND = 64
CYCLE_RATIO = 1e-3


@dataclass(frozen=True)
class GeodesicModel:
    """Intercept ``p`` and velocities ``V`` (shape ``(k, D)``) at ``p``.

    Covariates are measured from ``x_mean``, so ``predict(x)`` evaluates
    ``Exp(p, (x - x_mean) @ V)``.
    """

    manifold: object
    p: np.ndarray
    V: np.ndarray
    x_mean: np.ndarray = None

    def __post_init__(self):
        M = self.manifold
        p = np.array(self.p, dtype=M.dtype)
        V = np.array(self.V, dtype=M.dtype).reshape(-1, M.ambient_dim)
        k = V.shape[0]
        xm = np.zeros(k) if self.x_mean is None else np.array(self.x_mean, dtype=float).reshape(k)
        for a in (p, V, xm):
            a.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "x_mean", xm)

    @property
    def k(self):
        return self.V.shape[0]

    def velocity(self, x):
        x = _as_design(x, self.k)
        return (x - self.x_mean) @ self.V

    def predict(self, x):
        x = _as_design(x, self.k)
        return self.manifold.exp(self.p, (x - self.x_mean) @ self.V)

    def at_origin(self):
        """The same geodesic re-based at ``x = 0``.

        Exact for ``k <= 1``.  With several covariates on a curved manifold
        the re-based model is the first-order equivalent, since a geodesic
        submanifold seen from a different base point is not linear in ``x``.
        """
        if not np.any(self.x_mean):
            return self
        M = self.manifold
        shift = -(self.x_mean @ self.V)
        p0 = M.exp(self.p, shift)
        V0 = M.transport(self.p, p0, self.V) if self.k else self.V
        return GeodesicModel(M, p0, V0)

    def to_dict(self):
        return {
            "manifold": self.manifold.tag(),
            "p": _encode(self.p),
            "V": [_encode(v) for v in self.V],
            "x_mean": self.x_mean.tolist(),
        }


@dataclass(frozen=True)
class SolverConfig:
    loss_kind: str = "l2"
    lambda_max: float = 0.25
    tol_rel: float = 1e-9
    max_iter: int = 2000
    center_x: bool = True
    gradient_mode: str = "jacobi"
    efficiency: float = 0.95
    # Overrides the tuned c_H / c_T (in units of sigma_hat).
    cutoff_scale: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "loss_kind", self.loss_kind.lower())
        if self.loss_kind not in KINDS:
            raise DomainError(f"unknown loss {self.loss_kind!r}")
        if not self.tol_rel >= 0:
            raise DomainError("tol_rel must be nonnegative")
        if not self.lambda_max > 0:
            raise DomainError("lambda_max must be positive")
        if self.max_iter < 0:
            raise DomainError("max_iter must be nonnegative")
        if self.gradient_mode not in ("jacobi", "transport"):
            raise DomainError("gradient_mode is 'jacobi' or 'transport'")


@dataclass
class FitResult:
    model: GeodesicModel
    loss_kind: str
    final_loss: float
    iterations: int
    residual_norms: np.ndarray
    sigma_hat: float | None
    cutoff: float | None
    converged: bool
    stop_reason: str
    # One (iteration, loss_before, loss_after, step, cutoff) row per accepted step.
    trace: list = field(default_factory=list)

    def to_dict(self, include_trace=True):
        out = {
            "model": self.model.to_dict(),
            "loss": self.loss_kind,
            "final_loss": self.final_loss,
            "iterations": self.iterations,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "sigma_hat": self.sigma_hat,
            "cutoff": self.cutoff,
            "residual_norms": np.asarray(self.residual_norms).tolist(),
        }
        if include_trace:
            out["trace"] = [dict(zip(("iteration", "loss_before", "loss_after", "step", "cutoff"),
                                     row)) for row in self.trace]
        return out


def _encode(a):
    a = np.asarray(a)
    if np.iscomplexobj(a):
        return np.stack([a.real, a.imag], axis=-1).tolist()
    return a.tolist()


def _as_design(x, k):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None] if k == 1 else x.reshape(-1, k)
    if x.ndim != 2 or x.shape[1] != k:
        raise DomainError(f"covariates must have shape (N, {k}), got {x.shape}")
    return x


def _as_data(manifold, x, y):
    y = np.ascontiguousarray(np.asarray(y, dtype=manifold.dtype))
    if y.ndim != 2 or y.shape[1] != manifold.ambient_dim:
        raise ManifoldMismatchError(
            f"responses must have shape (N, {manifold.ambient_dim}), got {y.shape}")
    n_obs = y.shape[0]
    if x is None:
        x = np.zeros((n_obs, 0))
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] != n_obs:
        raise DomainError(f"covariates must have shape ({n_obs}, k), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError("covariates must be finite")
    if n_obs < x.shape[1] + 1:
        raise DomainError(f"need at least k + 1 = {x.shape[1] + 1} observations, got {n_obs}")
    return x, y


# ----------------------------------------------------------------------
# intrinsic mean
# ----------------------------------------------------------------------
def intrinsic_mean(manifold, points, tol=MEAN_TOL, max_iter=500, start=None):
    """Minimizer of the summed squared distances (Karcher mean).

    Iterates ``mu <- Exp(mu, mean_i Log(mu, y_i))`` from the extrinsic mean,
    halving the step whenever the Frechet functional would increase.  Stops
    once the mean log vector is shorter than ``tol``.
    """
    (pts,), _ = manifold._batch(points)
    if pts.shape[0] == 0:
        raise DomainError("intrinsic mean of an empty set")
    mu = manifold.extrinsic_mean(pts) if start is None else np.asarray(start, manifold.dtype)
    logs = manifold.log(mu, pts)
    f = 0.5 * np.mean(manifold.inner(logs, logs))
    step = 1.0
    for _ in range(max_iter):
        g = logs.mean(axis=0)
        gn = float(manifold.norm(g))
        if gn <= tol:
            return mu
        # Changes within rounding of f are not treated as increases.
        slack = 64.0 * np.finfo(float).eps * f
        while True:
            cand = manifold.exp(mu, step * g)
            cand_logs = manifold.log(cand, pts)
            fc = 0.5 * np.mean(manifold.inner(cand_logs, cand_logs))
            if fc <= f + slack or step < 1e-12:
                break
            step *= 0.5
        if fc > f + slack:
            return mu
        mu, logs, f = cand, cand_logs, fc
        step = min(1.0, 2.0 * step)
    raise ConvergenceError(f"intrinsic mean did not converge in {max_iter} iterations")


def frechet_variance(manifold, points, mean):
    """Mean squared distance from ``mean`` to ``points``."""
    d = manifold.dist(mean, points)
    return float(np.mean(np.square(d)))


# ----------------------------------------------------------------------
# loss and gradients
# ----------------------------------------------------------------------
def residuals(model, x, y):
    """``e_i = Log(yhat_i, y_i)`` together with ``yhat`` and the velocities."""
    M = model.manifold
    vx = model.velocity(x)
    yhat = M.exp(np.broadcast_to(model.p, (len(vx), M.ambient_dim)), vx)
    return M.log(yhat, y), yhat, vx


def loss_value(model, x, y, spec):
    """``sum_i rho(d(Exp(p, V x_i), y_i))``."""
    M = model.manifold
    x, y = _as_data(M, x, y)
    yhat = model.predict(x)
    return float(np.sum(spec.rho(M.dist(yhat, y))))


def _grads(M, p, x, vx, yhat, e, spec, mode):
    r = M.norm(e)
    scaled = spec.weight(r)[:, None] * e
    if x.shape[1] == 0:
        # yhat == p: both adjoints reduce to the identity.
        dp = dv = scaled
    elif mode == "jacobi":
        dp, dv = M.adjoints(p, vx, yhat, scaled)
    else:
        dp = dv = M.transport(yhat, p, scaled)
    gp = -dp.sum(axis=0)
    gV = -(x.T @ dv)
    return gp, gV


def gradients(model, x, y, spec, mode="jacobi"):
    """Gradients of :func:`loss_value` with respect to ``p`` and ``V``.

    ``mode="jacobi"`` uses the exact adjoints of the exponential map;
    ``mode="transport"`` replaces both by parallel transport to ``p``.
    """
    M = model.manifold
    x, y = _as_data(M, x, y)
    xc = x - model.x_mean
    e, yhat, vx = residuals(model, x, y)
    return _grads(M, model.p, xc, vx, yhat, e, spec, mode)


# ----------------------------------------------------------------------
# solver
# ----------------------------------------------------------------------
class _Problem:
    """Loss evaluations for fixed data, reused across iterations."""

    def __init__(self, M, x, y, mode):
        self.M, self.x, self.y, self.mode = M, x, y, mode
        self.n_obs = y.shape[0]

    def predict(self, p, V):
        M = self.M
        vx = self.x @ V
        return vx, M.exp(np.broadcast_to(p, (self.n_obs, M.ambient_dim)), vx)

    def loss(self, p, V, spec):
        _, yhat = self.predict(p, V)
        return float(np.sum(spec.rho(self.M.dist(yhat, self.y))))

    def state(self, p, V):
        vx, yhat = self.predict(p, V)
        e = self.M.log(yhat, self.y)
        return vx, yhat, e, self.M.norm(e)

    def grads(self, p, vx, yhat, e, spec):
        return _grads(self.M, p, self.x, vx, yhat, e, spec, self.mode)


def _scale(r, xi):
    mad = float(np.median(r))
    return mad, mad / xi


def fit(manifold, x, y, config=None, **overrides):
    """Fit a geodesic model to covariates ``x`` (N, k) and responses ``y``.

    ``x`` may be None (or have zero columns) for a location-only fit.
    Keyword overrides are applied on top of ``config``.
    """
    cfg = config or SolverConfig()
    if overrides:
        cfg = replace(cfg, **overrides)
    M = manifold
    x, y = _as_data(M, x, y)
    k = x.shape[1]
    x_mean = x.mean(axis=0) if cfg.center_x else np.zeros(k)
    xc = x - x_mean
    prob = _Problem(M, xc, y, cfg.gradient_mode)

    p = intrinsic_mean(M, y)
    V = np.zeros((k, M.ambient_dim), dtype=M.dtype)
    vx, yhat, e, r = prob.state(p, V)

    robust = cfg.loss_kind in ("huber", "tukey")
    sigma_hat = cutoff = None
    if robust:
        xi = tuning.xi(M.dim)
        c_kind = cfg.cutoff_scale or tuning.solve_cutoff(cfg.loss_kind, M.dim, cfg.efficiency)
        mad, sigma_hat = _scale(r, xi)
        if mad == 0.0:
            # Over half the data sit on the starting point: fall back to the
            # positive residuals so the cutoff is defined.
            pos = r[r > 0]
            if pos.size == 0:
                return _result(M, p, V, x_mean, cfg, 0.0, 0, r, 0.0, 0.0, True,
                               "perfect_fit", [])
            mad, sigma_hat = _scale(pos, xi)
        cutoff = c_kind * sigma_hat
        spec = LossSpec(cfg.loss_kind, cutoff)
    else:
        spec = LossSpec(cfg.loss_kind)

    energy = float(np.sum(spec.rho(r)))
    gp, gV = prob.grads(p, vx, yhat, e, spec)
    g2 = _gnorm2(M, p, gp, gV)
    g_floor = _grad_floor(M, prob, yhat, e) ** 2
    lam = _step_cap(M, gp, 0.1, cfg.lambda_max)
    trace = []
    history = [None, _flat(p, V)]
    cycle_tol = np.sqrt(cfg.tol_rel)
    stop = "max_iter"
    it = 0
    while it < cfg.max_iter:
        it += 1
        if lam == 0.0 or g2 <= g_floor:
            stop = "stationary"
            break
        p_new = M.exp(p, -lam * gp)
        V_new = V - lam * gV
        if k:
            V_new = M.reproject(p_new, M.transport(p, p_new, V_new))
        e_new = prob.loss(p_new, V_new, spec)
        if abs(e_new - energy) <= ROUNDING_BAND * _EPS * abs(energy):
            # The losses agree to rounding, so comparing them is noise: let
            # the gradient norm decide instead.
            cvx, cyhat, ce, _ = prob.state(p_new, V_new)
            accept = _gnorm2(M, p_new, *prob.grads(p_new, cvx, cyhat, ce, spec)) < g2
        else:
            accept = energy >= e_new
        if accept:
            trace.append((it, energy, e_new, lam, cutoff))
            decrease = energy - e_new
            p, V = p_new, V_new
            vx, yhat, e, r = prob.state(p, V)
            if robust:
                mad, s_new = _scale(r, xi)
                if mad == 0.0:
                    if not np.any(r):
                        energy, sigma_hat, cutoff = 0.0, 0.0, 0.0
                        stop = "perfect_fit"
                        break
                else:
                    sigma_hat = s_new
                    cutoff = c_kind * sigma_hat
                    spec = spec.with_cutoff(cutoff)
            energy = float(np.sum(spec.rho(r)))
            if energy == 0.0:
                stop = "perfect_fit"
                break
            if cfg.tol_rel > 0 and decrease <= cfg.tol_rel * abs(trace[-1][1]):
                stop = "tol_rel"
                break
            if robust:
                # Refreshing the cutoff can make the iterates alternate between
                # two states while each step still lowers its own objective.
                now = _flat(p, V)
                back2, back1 = history
                history = [back1, now]
                if back2 is not None:
                    tol = cycle_tol * (1.0 + np.max(np.abs(now)))
                    d2 = np.max(np.abs(now - back2))
                    # Plain zigzag across a valley also lands nearer to the
                    # state two steps back, but nowhere near this closely.
                    if d2 <= tol and d2 < CYCLE_RATIO * np.max(np.abs(now - back1)):
                        stop = "cutoff_cycle"
                        break
            gp, gV = prob.grads(p, vx, yhat, e, spec)
            g2 = _gnorm2(M, p, gp, gV)
            g_floor = _grad_floor(M, prob, yhat, e) ** 2
            lam = _step_cap(M, gp, 2.0 * lam, cfg.lambda_max)
        else:
            lam *= 0.5
            if lam < LAMBDA_MIN:
                stop = "step_underflow"
                break
    return _result(M, p, V, x_mean, cfg, energy, it, r, sigma_hat, cutoff,
                   stop not in ("max_iter", "cutoff_cycle"), stop, trace)


def _flat(p, V):
    return np.concatenate([np.ravel(p), np.ravel(V)]).view(float)


_EPS = float(np.finfo(float).eps)


def _gnorm2(M, p, gp, gV):
    """Squared norm of the full gradient; every component lives in ``T_p``."""
    total = float(M.inner(gp, gp))
    if len(gV):
        total += float(np.sum(M.inner(gV, gV)))
    return total


def _grad_floor(M, prob, yhat, e):
    """Rounding level of the gradient: below it the direction is noise."""
    size = M.norm(e) + np.linalg.norm(prob.y.view(float).reshape(prob.n_obs, -1), axis=1) \
        + np.linalg.norm(yhat.view(float).reshape(prob.n_obs, -1), axis=1)
    lever = 1.0 + np.linalg.norm(prob.x, axis=1)
    return ROUNDING_BAND * _EPS * float(size @ lever)


def _step_cap(M, gp, lam, lambda_max):
    gn = float(M.norm(gp))
    return lam if gn == 0.0 else min(lam, lambda_max / gn)


def _result(M, p, V, x_mean, cfg, energy, it, r, sigma_hat, cutoff, converged, stop, trace):
    model = GeodesicModel(M, p, V, x_mean)
    return FitResult(model=model, loss_kind=cfg.loss_kind, final_loss=float(energy),
                     iterations=it, residual_norms=np.asarray(r, dtype=float),
                     sigma_hat=sigma_hat, cutoff=cutoff, converged=converged,
                     stop_reason=stop, trace=trace)


def mse_pair(estimate, truth):
    """Squared errors of one estimate: ``d(p_hat, p)^2`` and, per velocity,
    ``|Gamma_{p_hat -> p}(v_hat) - v|^2``.

    Both models are compared at ``x = 0``.
    """
    est, tru = estimate.at_origin(), truth.at_origin()
    M = tru.manifold
    if est.manifold != M:
        raise ManifoldMismatchError("models live on different manifolds")
    if est.k != tru.k:
        raise DomainError("models have different numbers of covariates")
    dp = float(M.dist(est.p, tru.p)) ** 2
    if tru.k == 0:
        return dp, []
    moved = M.transport(est.p, tru.p, est.V)
    diff = moved - tru.V
    return dp, [float(v) for v in M.inner(diff, diff)]
