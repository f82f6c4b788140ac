"""Planar landmark data: loading, tampering, and the regression-on-age study.

A shape file is a CSV with header ``age,x1,y1,...,xK,yK`` and one subject
per row.  Landmarks are kept as raw ``(K, 2)`` coordinates; pre-shapes are
formed on demand, so tampering (reflection) followed by re-centering and
re-scaling is automatic.
"""
import csv
import math
from dataclasses import dataclass

import numpy as np

from . import tuning
from .errors import DomainError
from .manifolds import KendallShape
from .manifolds.kendall import as_real, preshape
from .regression import SolverConfig, fit
from .simulate import SCHEMA_VERSION, trial_rng

__all__ = [
    "ShapeDataset",
    "load_shapes",
    "run_shape_study",
    "save_shapes",
    "synthetic_shapes",
    "tamper",
    "tamper_distances",
]

STUDY_LOSSES = ("l2", "l1", "tukey")
_SHAPE_STREAM = 3


@dataclass(frozen=True)
class ShapeDataset:
    ages: np.ndarray
    landmarks: np.ndarray  # (subjects, K, 2)

    def __post_init__(self):
        ages = np.array(self.ages, dtype=float)
        lm = np.array(self.landmarks, dtype=float)
        if lm.ndim != 3 or lm.shape[2] != 2:
            raise DomainError(f"landmarks must have shape (subjects, K, 2), got {lm.shape}")
        if ages.shape != (lm.shape[0],):
            raise DomainError("one age per subject is required")
        if lm.shape[1] < 3:
            raise DomainError("need at least 3 landmarks")
        ages.setflags(write=False)
        lm.setflags(write=False)
        object.__setattr__(self, "ages", ages)
        object.__setattr__(self, "landmarks", lm)

    @property
    def k(self):
        return self.landmarks.shape[1]

    def __len__(self):
        return self.landmarks.shape[0]

    def manifold(self):
        return KendallShape(self.k)

    def preshapes(self):
        return preshape(self.landmarks)


def load_shapes(path):
    """Read a shape CSV (``age,x1,y1,...``)."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DomainError(f"{path}: empty shape file")
    header = [h.strip().lower() for h in rows[0]]
    if header[0] != "age" or (len(header) - 1) % 2 or len(header) < 7:
        raise DomainError(f"{path}: header must read age,x1,y1,...,xK,yK")
    k = (len(header) - 1) // 2
    expected = ["age"] + [f"{c}{i}" for i in range(1, k + 1) for c in "xy"]
    if header != expected:
        raise DomainError(f"{path}: unexpected column names")
    ages, coords = [], []
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DomainError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
        try:
            vals = [float(v) for v in row]
        except ValueError as exc:
            raise DomainError(f"{path}:{line}: {exc}") from None
        if not all(math.isfinite(v) for v in vals):
            raise DomainError(f"{path}:{line}: non-finite value")
        ages.append(vals[0])
        coords.append(np.reshape(vals[1:], (k, 2)))
    if not ages:
        raise DomainError(f"{path}: no subjects")
    return ShapeDataset(np.array(ages), np.array(coords))


def save_shapes(ds, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["age"] + [f"{c}{i}" for i in range(1, ds.k + 1) for c in "xy"])
        for age, lm in zip(ds.ages, ds.landmarks):
            w.writerow([repr(float(age))] + [repr(float(v)) for v in lm.ravel()])


def tamper(ds, indices):
    """Reflect the selected subjects (negate the second coordinate)."""
    idx = np.unique(np.asarray(list(indices), dtype=int))
    if idx.size and (idx.min() < 0 or idx.max() >= len(ds)):
        raise DomainError(f"tamper indices must lie in [0, {len(ds)})")
    lm = np.array(ds.landmarks)
    lm[idx, :, 1] *= -1.0
    return ShapeDataset(ds.ages, lm)


def tamper_distances(ds, indices):
    """Mean shape distance among untouched subjects, and from them to the
    tampered ones, measured on ``tamper(ds, indices)``."""
    idx = np.unique(np.asarray(list(indices), dtype=int))
    z = tamper(ds, idx).preshapes()
    M = ds.manifold()
    keep = np.setdiff1d(np.arange(len(ds)), idx)
    within = [M.dist(z[i], z[keep[j + 1:]]) for j, i in enumerate(keep[:-1])]
    within = np.concatenate(within) if within else np.array([np.nan])
    across = np.concatenate([M.dist(z[i], z[idx]) for i in keep]) if idx.size else np.array([np.nan])
    return float(np.mean(within)), float(np.mean(across))


def _template(k):
    # An asymmetric arch, so that reflection changes the shape.
    t = np.linspace(0.0, 2.0 * math.pi, k, endpoint=False)
    x = 2.0 * np.cos(t) + 0.3 * np.cos(2 * t)
    y = 0.8 * np.sin(t) + 0.35 * np.cos(2 * t) + 0.15 * np.sin(3 * t)
    return x + 1j * y


def synthetic_shapes(n_subjects=88, k=50, seed=0, noise=0.006, rate=0.002,
                     age_range=(55.0, 92.0)):
    """Landmark data along a geodesic in shape space with tangent noise.

    Ages are uniform on ``age_range``; the shape at age ``a`` is
    ``Exp(p, (a - mean_age) * v)`` perturbed by an isotropic tangent
    Gaussian with per-coordinate scale ``noise``.  ``|v| = rate`` per year.
    """
    rng = trial_rng(seed, _SHAPE_STREAM, n_subjects, k)
    M = KendallShape(k)
    p = preshape(_template(k))
    v = M.project(p, rng.standard_normal(k) + 1j * rng.standard_normal(k))
    v *= rate / M.norm(v)
    ages = np.sort(rng.uniform(*age_range, size=n_subjects))
    centre = 0.5 * (age_range[0] + age_range[1])
    mean = M.exp(np.broadcast_to(p, (n_subjects, k)), (ages - centre)[:, None] * v)
    if noise > 0:
        eps = M.project(mean, noise * (rng.standard_normal((n_subjects, k))
                                       + 1j * rng.standard_normal((n_subjects, k))))
        mean = M.exp(mean, eps)
    # Random similarity transforms: the data should not arrive pre-aligned.
    rot = np.exp(1j * rng.uniform(0, 2 * math.pi, n_subjects))
    scale = rng.uniform(50.0, 150.0, n_subjects)
    shift = rng.normal(0.0, 20.0, n_subjects) + 1j * rng.normal(0.0, 20.0, n_subjects)
    z = mean * (rot * scale)[:, None] + shift[:, None]
    return ShapeDataset(ages, as_real(z))


def _compare(M, a, b):
    d = float(M.dist(a.p, b.p))
    moved = M.transport(a.p, b.p, a.V[0])
    return d, float(M.norm(moved - b.V[0]))


def run_shape_study(ds, losses=STUDY_LOSSES, tamper_indices=(), config=None,
                    ages=tuple(range(50, 100, 5))):
    """Fit shape against age with each loss on clean and tampered data.

    Every fit is compared with the clean L2 fit through the intercept
    distance and the transported-velocity difference.  The report also
    carries the fitted shape at each of ``ages`` and the tuning constants.
    """
    M = ds.manifold()
    losses = tuple(s.lower() for s in losses)
    base = config or SolverConfig()
    n = M.dim
    cfgs = {loss: SolverConfig(**{**base.__dict__, "loss_kind": loss})
            for loss in dict.fromkeys(("l2",) + losses)}
    sets = {"clean": ds}
    tamper_indices = sorted(set(int(i) for i in tamper_indices))
    if tamper_indices:
        sets["tampered"] = tamper(ds, tamper_indices)
    fits = {}
    for label, data in sets.items():
        y = data.preshapes()
        for loss, cfg in cfgs.items():
            fits[(label, loss)] = fit(M, data.ages, y, cfg)
    ref = fits[("clean", "l2")].model
    comparisons, sequences = [], []
    for (label, loss), res in fits.items():
        if loss not in losses:
            continue
        d_p, d_v = _compare(M, res.model, ref)
        comparisons.append({"data": label, "loss": loss, "d_p": d_p, "d_v": d_v,
                            "iterations": res.iterations, "stop_reason": res.stop_reason})
        traj = res.model.predict(np.asarray(ages, dtype=float))
        sequences.append({"data": label, "loss": loss, "ages": list(ages),
                          "landmarks": as_real(traj).tolist()})
    report = {
        "schema_version": SCHEMA_VERSION,
        "subjects": len(ds),
        "landmarks": ds.k,
        "dimension": n,
        "xi": tuning.xi(n),
        "c_tukey": tuning.solve_cutoff("tukey", n),
        # No Huber cutoff reaches the target once L1 alone is that efficient.
        "c_huber": (tuning.solve_cutoff("huber", n) if tuning.are_l1(n) < 0.95 else None),
        "are_l1": tuning.are_l1(n),
        "tamper_indices": tamper_indices,
        "comparisons": comparisons,
        "sequences": sequences,
    }
    if tamper_indices:
        within, across = tamper_distances(ds, tamper_indices)
        report["mean_distance_untampered"] = within
        report["mean_distance_to_tampered"] = across
    return report
