"""Monte Carlo harness for the regression and efficiency experiments.

Every trial draws from its own counter-based stream keyed by
``(seed, stream, N, trial)``, so a trial's data do not depend on which other
trials run or in what order.  Failed fits are counted per loss and sample
size; averages are over the successful trials.
"""
import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import rnormal
from .errors import RobgeoError
from .losses import KINDS
from .manifolds import Hyperbolic, Sphere, get_manifold
from .regression import GeodesicModel, SolverConfig, fit, intrinsic_mean, mse_pair

__all__ = [
    "EfficiencyRow",
    "ExperimentSpec",
    "MseRow",
    "NoiseSpec",
    "default_truth",
    "rows_to_csv",
    "run_efficiency_experiment",
    "run_mse_experiment",
    "trial_rng",
]

SCHEMA_VERSION = 1
_MSE_STREAM = 1
_EFF_STREAM = 2


def trial_rng(seed, *keys):
    """Independent generator for one trial, keyed by integers."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)])))


@dataclass(frozen=True)
class NoiseSpec:
    """Error law: ``N`` (Riemannian normal), ``T`` (tangent-space t) or ``C``
    (two-component normal mixture)."""

    kind: str = "N"
    sigma: float = math.pi / 8
    scale: float = math.pi / 16
    nu: float = 4.0
    sigma_main: float = math.pi / 24
    sigma_out: float = math.pi / 6
    p_out: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "kind", self.kind.upper())
        if self.kind not in ("N", "T", "C", "NONE"):
            raise ValueError(f"unknown noise kind {self.kind!r}")

    def draw(self, manifold, means, rng):
        if self.kind == "NONE":
            return np.array(means, copy=True)
        if self.kind == "N":
            return rnormal.sample(manifold, means, self.sigma, rng)
        if self.kind == "T":
            return rnormal.sample_tangent_t(manifold, means, self.scale, self.nu, rng)
        return rnormal.sample_contaminated(manifold, means, self.sigma_main, self.sigma_out,
                                           self.p_out, rng)

    def label(self):
        return self.kind if self.kind != "NONE" else "none"


def default_truth(manifold):
    """True parameters of the simulation study for ``S^2, H^2, S^3, H^3``."""
    if not isinstance(manifold, (Sphere, Hyperbolic)) or manifold.n not in (2, 3):
        raise ValueError("default parameters exist for S^2, H^2, S^3 and H^3")
    D = manifold.ambient_dim
    p = np.eye(D)[0]
    v1 = np.zeros(D)
    v1[1] = math.pi / 4
    if manifold.n == 2:
        return GeodesicModel(manifold, p, [v1])
    v2 = np.zeros(D)
    v2[3] = -math.pi / 6
    return GeodesicModel(manifold, p, [v1, v2])


@dataclass
class ExperimentSpec:
    manifold: str = "sphere"
    dim: int = 2
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    sample_sizes: tuple = (4, 8, 16, 32, 64)
    trials: int = 64
    seed: int = 0
    losses: tuple = KINDS
    # None selects the default parameters for the manifold.
    p: list | None = None
    V: list | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if any(int(n) < 1 for n in self.sample_sizes):
            raise ValueError("sample sizes must be positive")
        if isinstance(self.noise, dict):
            self.noise = NoiseSpec(**self.noise)
        self.sample_sizes = tuple(int(n) for n in self.sample_sizes)
        self.losses = tuple(s.lower() for s in self.losses)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.pop("schema_version", None)
        return cls(**d)

    def to_dict(self):
        d = asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        return d

    def space(self):
        return get_manifold(self.manifold, self.dim)

    def truth(self):
        M = self.space()
        if self.p is None:
            return default_truth(M)
        return GeodesicModel(M, self.p, self.V if self.V is not None else [])


@dataclass
class MseRow:
    manifold: str
    noise: str
    loss: str
    N: int
    trials: int
    failures: int
    mse_p: float
    mse_v: list

    def as_csv(self, k):
        vals = list(self.mse_v) + [float("nan")] * (k - len(self.mse_v))
        return [SCHEMA_VERSION, self.manifold, self.noise, self.loss, self.N, self.trials,
                self.failures, repr(self.mse_p)] + [repr(v) for v in vals]


def _tag(M):
    return f"{M.name}{M.dim}"


def _simulate_trial(spec, M, truth, n_obs, trial, configs):
    rng = trial_rng(spec.seed, _MSE_STREAM, n_obs, trial)
    x = rng.uniform(-0.5, 0.5, size=(n_obs, truth.k))
    y = spec.noise.draw(M, truth.predict(x), rng)
    out = {}
    for loss, cfg in configs.items():
        try:
            res = fit(M, x, y, cfg)
            out[loss] = mse_pair(res.model, truth)
        except (RobgeoError, AssertionError, FloatingPointError) as exc:
            out[loss] = exc
    return out


def run_mse_experiment(spec, trial_ids=None, config=None):
    """MSE of the intercept and each velocity for every (N, loss) pair.

    ``trial_ids`` restricts the run to a subset of trials (their results are
    identical to the ones obtained in a full run).  Returns ``(rows,
    failures)`` with one :class:`MseRow` per (N, loss) and a list of
    ``(N, trial, loss, message)`` tuples.
    """
    M = spec.space()
    truth = spec.truth()
    base = config or SolverConfig()
    configs = {loss: SolverConfig(**{**asdict(base), "loss_kind": loss}) for loss in spec.losses}
    ids = range(spec.trials) if trial_ids is None else sorted(trial_ids)
    rows, failures = [], []
    for n_obs in spec.sample_sizes:
        per_loss = {loss: [] for loss in spec.losses}
        for trial in ids:
            for loss, value in _simulate_trial(spec, M, truth, n_obs, trial, configs).items():
                if isinstance(value, Exception):
                    failures.append((n_obs, trial, loss, f"{type(value).__name__}: {value}"))
                else:
                    per_loss[loss].append(value)
        for loss in spec.losses:
            ok = per_loss[loss]
            if ok:
                mse_p = float(np.mean([v[0] for v in ok]))
                mse_v = [float(np.mean([v[1][j] for v in ok])) for j in range(truth.k)]
            else:
                mse_p, mse_v = float("nan"), [float("nan")] * truth.k
            rows.append(MseRow(_tag(M), spec.noise.label(), loss, n_obs, len(ok),
                               len(ids) - len(ok), mse_p, mse_v))
    return rows, failures


@dataclass
class EfficiencyRow:
    manifold: str
    sigma: float
    N: int
    trials: int
    failures: int
    variances: dict
    ratios: dict

    def as_csv(self, losses):
        return ([SCHEMA_VERSION, self.manifold, repr(self.sigma), self.N, self.trials,
                 self.failures]
                + [repr(self.variances[k]) for k in losses]
                + [repr(self.ratios[k]) for k in losses if k != "l2"])


def run_efficiency_experiment(manifold, sigmas, n_obs=256, trials=256, seed=0,
                              losses=KINDS, mu=None, config=None):
    """Relative efficiencies of location estimators under normal errors.

    For each ``sigma`` draws ``trials`` samples of size ``n_obs`` around
    ``mu`` and fits every loss with no covariates.  The spread of each
    estimator is the Frechet variance of its estimates about their own
    intrinsic mean; ratios are ``s2_l2 / s2_loss``.  A trial in which any
    loss fails is dropped for all losses, so the ratios compare the same
    datasets.
    """
    M = manifold
    mu = np.eye(M.ambient_dim)[0] if mu is None else np.asarray(mu, dtype=float)
    losses = tuple(s.lower() for s in losses)
    base = config or SolverConfig()
    configs = {loss: SolverConfig(**{**asdict(base), "loss_kind": loss}) for loss in losses}
    rows = []
    for si, sigma in enumerate(sigmas):
        est = {loss: [] for loss in losses}
        failed = 0
        for trial in range(trials):
            rng = trial_rng(seed, _EFF_STREAM, si, n_obs, trial)
            y = rnormal.sample(M, mu, sigma, rng, n_obs)
            try:
                fits = {loss: fit(M, None, y, cfg).model.p for loss, cfg in configs.items()}
            except (RobgeoError, AssertionError):
                failed += 1
                continue
            for loss in losses:
                est[loss].append(fits[loss])
        var = {}
        for loss in losses:
            pts = np.array(est[loss])
            centre = intrinsic_mean(M, pts)
            var[loss] = float(np.mean(M.dist(centre, pts) ** 2))
        ratios = {loss: var["l2"] / var[loss] for loss in losses if loss != "l2"} \
            if "l2" in var else {}
        rows.append(EfficiencyRow(_tag(M), float(sigma), n_obs, trials - failed, failed,
                                  var, ratios))
    return rows


def rows_to_csv(rows, stream=None):
    """Write MSE or efficiency rows as CSV; returns the text when ``stream`` is None."""
    out = io.StringIO() if stream is None else stream
    w = csv.writer(out, lineterminator="\n")
    if rows and isinstance(rows[0], MseRow):
        k = max(len(r.mse_v) for r in rows)
        w.writerow(["schema_version", "manifold", "noise", "loss", "N", "trials", "failures",
                    "mse_p"] + [f"mse_v{j + 1}" for j in range(k)])
        for r in rows:
            w.writerow(r.as_csv(k))
    elif rows:
        losses = list(rows[0].variances)
        w.writerow(["schema_version", "manifold", "sigma", "N", "trials", "failures"]
                   + [f"s2_{k}" for k in losses]
                   + [f"ratio_{k}" for k in losses if k != "l2"])
        for r in rows:
            w.writerow(r.as_csv(losses))
    return out.getvalue() if stream is None else None
