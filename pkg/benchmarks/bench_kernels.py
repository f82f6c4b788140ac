"""Time the compiled kernels against the numpy fallback.

Usage: ``python benchmarks/bench_kernels.py [--repeat R]``.  Prints one row
per workload with the best time for each available backend and the ratio.
"""
import argparse
import math
import timeit

import numpy as np

from robgeo import Hyperbolic, Sphere, _backend, fit, rnormal, specfun
from robgeo.simulate import default_truth


def workloads():
    rng = np.random.default_rng(0)
    S, H = Sphere(2), Hyperbolic(3)
    p = S.random_point(rng, size=2000)
    v = np.array([S.random_tangent(rng, pi, 0.5) for pi in p])
    q = S.exp(p, v)
    hp = H.random_point(rng, size=2000)
    hv = np.array([H.random_tangent(rng, pi, 0.5) for pi in hp])
    hq = H.exp(hp, hv)
    truth = default_truth(S)
    x = rng.uniform(-0.5, 0.5, (256, 1))
    y = rnormal.sample(S, truth.predict(x), math.pi / 16, rng)
    a = np.linspace(0.1, 60, 200)
    return {
        "sphere exp/log (2000 pts)": lambda: S.log(p, S.exp(p, v)),
        "sphere transport (2000)": lambda: S.transport(p, q, v),
        "hyperbolic adjoints (2000)": lambda: H.adjoints(hp, hv, hq, hv),
        "incomplete gamma (200 calls)": lambda: [specfun.reg_lower_gamma(ai, ai + 1.0) for ai in a],
        "radial CDF table H^3": lambda: rnormal.RiemannianNormal(H, 0.3).radial_cdf(
            np.linspace(0, 3, 2000)),
        "Tukey fit, S^2, N=256": lambda: fit(S, x, y, loss_kind="tukey"),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    names = _backend.available()
    jobs = workloads()
    print(f"{'workload':32s}" + "".join(f"{n:>12s}" for n in names)
          + ("   speedup" if len(names) > 1 else ""))
    for label, job in jobs.items():
        best = {}
        for name in names:
            prev = _backend.set_backend(name)
            try:
                job()
                t = timeit.Timer(job)
                n, _ = t.autorange()
                best[name] = min(t.repeat(args.repeat, n)) / n
            finally:
                _backend.set_backend(prev)
        row = f"{label:32s}" + "".join(f"{best[n] * 1e3:10.3f}ms" for n in names)
        if len(names) > 1:
            row += f"{best['python'] / best['cython']:9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
