"""Command-line interface: ``robgeo <command> ...``.

Every command writes JSON or CSV carrying a ``schema_version`` field, to a
file given by ``--out`` or to standard output.
"""
import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import rnormal, tuning
from .errors import RobgeoError
from .manifolds import KendallShape, get_manifold
from .regression import SolverConfig, fit
from .simulate import (
    SCHEMA_VERSION,
    ExperimentSpec,
    NoiseSpec,
    rows_to_csv,
    run_efficiency_experiment,
    run_mse_experiment,
    trial_rng,
)

DESK_SIGMAS = (math.pi / 32, math.pi / 16, math.pi / 8)
FULL_SIGMAS = DESK_SIGMAS + (math.pi / 4, math.pi / 2)


def _emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def _parse_sigma(text):
    """A number, or an expression ``pi/k`` / ``pi*k``."""
    t = text.strip().lower().replace(" ", "")
    if t.startswith("pi"):
        rest = t[2:]
        if not rest:
            return math.pi
        if rest[0] == "/":
            return math.pi / float(rest[1:])
        if rest[0] == "*":
            return math.pi * float(rest[1:])
    return float(t)


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------
def cmd_tune(args):
    n = args.dim
    out = {"schema_version": SCHEMA_VERSION, "n": n, "target": args.target,
           "xi": tuning.xi(n), "are_l1": tuning.are_l1(n)}
    if args.estimator in ("huber", "all"):
        out["c_huber"] = tuning.solve_cutoff("huber", n, args.target)
    if args.estimator in ("tukey", "all"):
        out["c_tukey"] = tuning.solve_cutoff("tukey", n, args.target)
    _emit(_json(out), args.out)


def cmd_sample(args):
    M = get_manifold(args.manifold, args.dim)
    mu = np.eye(M.ambient_dim)[0] if args.mu is None else np.array(
        [float(v) for v in args.mu.split(",")])
    rng = trial_rng(args.seed, 0)
    y = rnormal.sample(M, mu, args.sigma, rng, args.n_samples)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["schema_version"] + [f"y{i + 1}" for i in range(M.ambient_dim)])
    for row in y:
        w.writerow([SCHEMA_VERSION] + [repr(float(v)) for v in row])
    _emit(buf.getvalue(), args.out)


def read_regression_csv(path, manifold=None, dim=None):
    """Covariates and responses from a regression data file.

    An optional first line ``# manifold=<kind> dim=<size>`` declares the
    manifold; the header row names covariate columns ``x1..xk`` followed by
    response columns ``y1..yD``.  Shape-space responses list the real and
    imaginary parts of each landmark in turn.
    """
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    meta = {}
    while lines and lines[0].startswith("#"):
        for item in lines.pop(0)[1:].split():
            key, _, val = item.partition("=")
            meta[key.strip().lower()] = val.strip()
    rows = [r for r in csv.reader(lines) if r]
    if not rows:
        raise RobgeoError(f"{path}: no header row")
    header = [h.strip().lower() for h in rows[0]]
    xcols = [i for i, h in enumerate(header) if h.startswith("x")]
    ycols = [i for i, h in enumerate(header) if h.startswith("y")]
    if len(xcols) + len(ycols) != len(header) or (xcols and max(xcols) > min(ycols)):
        raise RobgeoError(f"{path}: header must be x1..xk followed by y1..yD")
    kind = manifold or meta.get("manifold")
    size = dim or (int(meta["dim"]) if "dim" in meta else None)
    if kind is None or size is None:
        raise RobgeoError("manifold and dim must be given on the command line or in the file")
    M = get_manifold(kind, size)
    width = 2 * M.ambient_dim if isinstance(M, KendallShape) else M.ambient_dim
    if len(ycols) != width:
        raise RobgeoError(f"{path}: {M!r} needs {width} response columns, found {len(ycols)}")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise RobgeoError(f"{path}: {exc}") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise RobgeoError(f"{path}: ragged rows")
    x, y = data[:, xcols], data[:, ycols]
    if isinstance(M, KendallShape):
        y = y[:, 0::2] + 1j * y[:, 1::2]
    return M, x, M.normalize(y)


def cmd_fit(args):
    M, x, y = read_regression_csv(args.data, args.manifold, args.dim)
    cfg = SolverConfig(loss_kind=args.loss, center_x=not args.no_center,
                       gradient_mode=args.gradient_mode, max_iter=args.max_iter)
    res = fit(M, x, y, cfg)
    out = {"schema_version": SCHEMA_VERSION, **res.to_dict()}
    _emit(_json(out), args.out)


def cmd_simulate_mse(args):
    if args.config:
        with open(args.config) as fh:
            spec = ExperimentSpec.from_dict(json.load(fh))
    else:
        spec = ExperimentSpec(manifold=args.manifold, dim=args.dim,
                              noise=NoiseSpec(args.noise), trials=args.trials)
    spec.seed = args.seed if args.seed is not None else spec.seed
    if args.full:
        spec.trials = 1024
        spec.sample_sizes = tuple(2 ** h for h in range(2, 9))
    rows, failures = run_mse_experiment(spec)
    _emit(rows_to_csv(rows), args.out)
    for n_obs, trial, loss, msg in failures:
        print(f"failed: N={n_obs} trial={trial} loss={loss}: {msg}", file=sys.stderr)


def cmd_simulate_efficiency(args):
    M = get_manifold(args.manifold, args.dim)
    if args.sigmas:
        sigmas = [_parse_sigma(s) for s in args.sigmas.split(",")]
    else:
        sigmas = FULL_SIGMAS if args.full else DESK_SIGMAS
    trials = 1024 if args.full else args.trials
    rows = run_efficiency_experiment(M, sigmas, args.n, trials, args.seed or 0)
    _emit(rows_to_csv(rows), args.out)


def cmd_shapes_fit(args):
    from .shapes import load_shapes, run_shape_study, synthetic_shapes

    if args.data:
        ds = load_shapes(args.data)
    else:
        ds = synthetic_shapes(seed=args.seed or 0)
    if args.tamper_indices:
        idx = [int(v) for v in args.tamper_indices.split(",") if v.strip()]
    elif args.tamper_count:
        rng = trial_rng(args.seed or 0, 4)
        idx = sorted(rng.choice(len(ds), size=args.tamper_count, replace=False).tolist())
    else:
        idx = []
    losses = [s.strip() for s in args.losses.split(",")]
    report = run_shape_study(ds, losses, idx)
    report["source"] = args.data or "synthetic"
    _emit(_json(report), args.out)


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------
def _globals(defaults):
    """Flags accepted both before and after the subcommand.

    Subcommand copies use suppressed defaults so that they do not overwrite
    a value given before the subcommand.
    """
    kw = {} if defaults else {"default": argparse.SUPPRESS}
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--seed", type=int, help="master seed (default 0)",
                   **(kw or {"default": None}))
    g.add_argument("--full", action="store_true",
                   help="use the full experiment sizes instead of desk scale", **kw)
    g.add_argument("--out", help="output file (default: stdout)", **(kw or {"default": None}))
    return g


def build_parser():
    common = _globals(False)
    parser = argparse.ArgumentParser(prog="robgeo", parents=[_globals(True)],
                                     description="Robust geodesic regression tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tune", parents=[common], help="tuning constants for dimension n")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--estimator", choices=("huber", "tukey", "all"), default="all")
    p.add_argument("--target", type=float, default=0.95)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("sample", parents=[common], help="Riemannian normal draws")
    p.add_argument("--manifold", choices=("sphere", "hyperbolic"), required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--sigma", type=_parse_sigma, required=True)
    p.add_argument("--n-samples", type=int, required=True)
    p.add_argument("--mu", default=None, help="comma-separated ambient coordinates")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("fit", parents=[common], help="fit a geodesic model to a CSV file")
    p.add_argument("--data", required=True)
    p.add_argument("--manifold", default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--loss", choices=("l2", "l1", "huber", "tukey"), default="l2")
    p.add_argument("--gradient-mode", choices=("jacobi", "transport"), default="jacobi")
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--no-center", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo experiments")
    simsub = p.add_subparsers(dest="experiment", required=True)
    q = simsub.add_parser("mse", parents=[common])
    q.add_argument("--config", default=None, help="JSON experiment specification")
    q.add_argument("--manifold", default="sphere")
    q.add_argument("--dim", type=int, default=2)
    q.add_argument("--noise", default="N", choices=("N", "T", "C", "none"))
    q.add_argument("--trials", type=int, default=64)
    q.set_defaults(func=cmd_simulate_mse)
    q = simsub.add_parser("efficiency", parents=[common])
    q.add_argument("--manifold", default="sphere", choices=("sphere", "hyperbolic"))
    q.add_argument("--dim", type=int, default=3)
    q.add_argument("--sigmas", default=None, help="comma-separated, e.g. pi/32,pi/16")
    q.add_argument("--n", type=int, default=256)
    q.add_argument("--trials", type=int, default=256)
    q.set_defaults(func=cmd_simulate_efficiency)

    p = sub.add_parser("shapes", parents=[common], help="shape-space regression study")
    shsub = p.add_subparsers(dest="action", required=True)
    q = shsub.add_parser("fit", parents=[common])
    q.add_argument("--data", default=None, help="shape CSV (default: synthetic data)")
    q.add_argument("--tamper-indices", default=None)
    q.add_argument("--tamper-count", type=int, default=0,
                   help="reflect this many randomly chosen subjects")
    q.add_argument("--losses", default="l2,l1,tukey")
    q.set_defaults(func=cmd_shapes_fit)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is None and args.command == "sample":
        args.seed = 0
    try:
        args.func(args)
    except (RobgeoError, ValueError, OSError) as exc:
        print(f"robgeo: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
