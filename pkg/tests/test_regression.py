import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

import _oracles as oracles
from robgeo import regression
from robgeo.errors import CutLocusError, DomainError, ManifoldMismatchError
from robgeo.losses import LossSpec
from robgeo.manifolds import Euclidean, Hyperbolic, KendallShape, Sphere
from robgeo.regression import (
    GeodesicModel,
    SolverConfig,
    fit,
    frechet_variance,
    gradients,
    intrinsic_mean,
    loss_value,
    mse_pair,
)

LOSSES = ("l2", "l1", "huber", "tukey")
BAND = regression.ROUNDING_BAND * np.finfo(float).eps


def simulation_truth(M):
    D = M.ambient_dim
    p = np.eye(D)[0]
    v1 = np.zeros(D)
    v1[1] = math.pi / 4
    if M.n == 2:
        return GeodesicModel(M, p, [v1])
    v2 = np.zeros(D)
    v2[3] = -math.pi / 6
    return GeodesicModel(M, p, [v1, v2])


class TestIntrinsicMean:
    def test_all_equal(self):
        M = Sphere(2)
        q = M.normalize(np.array([0.3, -0.2, 0.9]))
        assert M.dist(intrinsic_mean(M, np.tile(q, (5, 1))), q) < 1e-15

    def test_midpoint(self, rng):
        M = Sphere(2)
        a, b = M.random_point(rng, size=2)
        mu = intrinsic_mean(M, np.stack([a, b]))
        assert M.dist(mu, a) == pytest.approx(M.dist(mu, b), abs=1e-9)
        assert M.dist(mu, a) == pytest.approx(0.5 * M.dist(a, b), abs=1e-9)

    def test_grid_search(self, rng):
        M = Sphere(2)
        pole = np.array([0.0, 0.0, 1.0])
        pts = M.exp(np.tile(pole, (10, 1)),
                    np.column_stack([rng.normal(0, 0.3, (10, 2)), np.zeros(10)]))

        def frechet(theta, phi):
            q = np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi),
                          np.cos(theta)], axis=-1)
            cos = np.clip(q @ pts.T, -1.0, 1.0)
            return np.sum(np.arccos(cos) ** 2, axis=-1)

        # Coarse grid, then a fine grid around its best cell.
        th, ph = np.meshgrid(np.linspace(0, 1.2, 241), np.linspace(-math.pi, math.pi, 721))
        f = frechet(th, ph)
        i = np.unravel_index(np.argmin(f), f.shape)
        t0, p0 = th[i], ph[i]
        th, ph = np.meshgrid(np.linspace(t0 - 0.01, t0 + 0.01, 801),
                             np.linspace(p0 - 0.02, p0 + 0.02, 801))
        f = frechet(th, ph)
        i = np.unravel_index(np.argmin(f), f.shape)
        best = np.array([np.sin(th[i]) * np.cos(ph[i]), np.sin(th[i]) * np.sin(ph[i]),
                         np.cos(th[i])])
        assert M.dist(intrinsic_mean(M, pts), best) < 1e-4

    @pytest.mark.parametrize("M", (Sphere(3), Hyperbolic(2), KendallShape(5)), ids=repr)
    def test_stationary(self, M, rng):
        mu0 = oracles.random_base(M, rng)
        pts = M.exp(np.broadcast_to(mu0, (20, M.ambient_dim)),
                    np.array([M.random_tangent(rng, mu0, 0.3) for _ in range(20)]))
        mu = intrinsic_mean(M, pts)
        assert M.norm(M.log(mu, pts).mean(axis=0)) <= 1e-10

    def test_empty(self):
        with pytest.raises(DomainError):
            intrinsic_mean(Sphere(2), np.zeros((0, 3)))


class TestFrechetVariance:
    def test_all_equal(self):
        M = Hyperbolic(2)
        assert frechet_variance(M, np.tile(M.origin(), (4, 1)), M.origin()) == 0.0

    def test_midpoint(self, rng):
        M = Sphere(2)
        a, b = M.random_point(rng, size=2)
        mu = intrinsic_mean(M, np.stack([a, b]))
        d = float(M.dist(a, b))
        assert frechet_variance(M, np.stack([a, b]), mu) == pytest.approx((d / 2) ** 2, abs=1e-12)


class TestLossValue:
    @pytest.mark.parametrize("kind", LOSSES)
    def test_perfect_fit(self, kind, rng):
        M = Sphere(2)
        truth = simulation_truth(M)
        x = rng.uniform(-0.5, 0.5, (10, 1))
        spec = LossSpec(kind, 1.0 if kind in ("huber", "tukey") else None)
        assert loss_value(truth, x, truth.predict(x), spec) == pytest.approx(0.0, abs=1e-14)

    def test_single_point_l1(self):
        M = Hyperbolic(2)
        model = GeodesicModel(M, M.origin(), [])
        y = M.exp(M.origin(), np.array([0.0, 0.7, 0.0]))
        assert loss_value(model, None, y[None], LossSpec("l1")) == pytest.approx(0.7, abs=1e-14)

    def test_recomputation(self, rng):
        M = Sphere(3)
        model, x, y = oracles.random_problem(M, rng, 2)
        spec = LossSpec("huber", 0.2)
        ref = 0.0
        for xi, yi in zip(x, y):
            yhat = M.exp(model.p, xi @ model.V)
            d = math.acos(min(1.0, float(yhat @ yi)))
            ref += 0.5 * d * d if d <= 0.2 else 0.2 * (d - 0.1)
        assert loss_value(model, x, y, spec) == pytest.approx(ref, abs=1e-12)


class TestGradients:
    def test_zero_residual(self, rng):
        M = Hyperbolic(3)
        truth = simulation_truth(M)
        x = rng.uniform(-0.5, 0.5, (9, 2))
        gp, gV = gradients(truth, x, truth.predict(x), LossSpec("l2"))
        assert np.max(np.abs(gp)) < 1e-13 and np.max(np.abs(gV)) < 1e-13

    @pytest.mark.parametrize("M", (Sphere(2), Hyperbolic(2), KendallShape(4)), ids=repr)
    @pytest.mark.parametrize("spec", oracles.loss_specs(), ids=lambda s: s.kind)
    def test_finite_differences(self, M, spec, rng):
        worst = max(oracles.loss_gradient_error(M, rng, spec, k=k) for k in (1, 2) for _ in range(5))
        assert worst < 1e-5

    def test_location_l2_is_karcher_gradient(self, rng):
        M = Sphere(2)
        p = M.random_point(rng)
        y = M.exp(np.tile(p, (6, 1)), np.array([M.random_tangent(rng, p, 0.4) for _ in range(6)]))
        model = GeodesicModel(M, p, np.zeros((1, 3)))
        gp, _ = gradients(model, rng.uniform(-1, 1, 6), y, LossSpec("l2"))
        np.testing.assert_allclose(gp, -M.log(p, y).sum(axis=0), atol=1e-14)

    def test_transport_mode_agrees_near_zero_velocity(self, rng):
        M = Sphere(2)
        truth, x, y = oracles.random_problem(M, rng, 1, noise=0.05)
        small = GeodesicModel(M, truth.p, 1e-4 * truth.V)
        a = gradients(small, x, y, LossSpec("l2"), mode="jacobi")
        b = gradients(small, x, y, LossSpec("l2"), mode="transport")
        np.testing.assert_allclose(a[0], b[0], atol=1e-4)

    def test_tangent(self, rng):
        M = Hyperbolic(3)
        model, x, y = oracles.random_problem(M, rng, 2)
        gp, gV = gradients(model, x, y, LossSpec("tukey", 0.5))
        assert M.tangent_residual(model.p, gp) < 1e-10
        assert max(M.tangent_residual(model.p, g) for g in gV) < 1e-10

    def test_cut_locus_index(self):
        M = Sphere(2)
        model = GeodesicModel(M, [1.0, 0.0, 0.0], [[0.0, 0.5, 0.0]])
        x = np.array([[-0.5], [0.0], [0.5]])
        y = model.predict(x)
        y[2] = -y[2]
        with pytest.raises(CutLocusError) as info:
            gradients(model, x, y, LossSpec("l2"))
        assert info.value.index == 2


class TestFit:
    @pytest.mark.parametrize("M", (Sphere(2), Hyperbolic(2)), ids=repr)
    @pytest.mark.parametrize("kind", LOSSES)
    def test_noiseless_simple(self, M, kind, rng):
        truth = simulation_truth(M)
        x = rng.uniform(-0.5, 0.5, (32, 1))
        res = fit(M, x, truth.predict(x), loss_kind=kind)
        dp, dv = mse_pair(res.model, truth)
        assert math.sqrt(dp) < 1e-6 and math.sqrt(dv[0]) < 1e-6

    @pytest.mark.parametrize("M", (Sphere(3), Hyperbolic(3)), ids=repr)
    @pytest.mark.parametrize("kind", LOSSES)
    def test_noiseless_multiple(self, M, kind, rng):
        truth = simulation_truth(M)
        x = rng.uniform(-0.5, 0.5, (32, 2))
        # Re-basing a centered multi-covariate fit is only first-order exact,
        # so the comparison is made without centering.
        res = fit(M, x, truth.predict(x), loss_kind=kind, center_x=False)
        dp, dv = mse_pair(res.model, truth)
        assert math.sqrt(dp) < 1e-6 and max(math.sqrt(v) for v in dv) < 1e-6

    def test_euclidean_least_squares(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            D, k = int(rng.integers(1, 5)), int(rng.integers(1, 4))
            N = int(rng.integers(k + 3, 40))
            x = rng.normal(size=(N, k))
            y = rng.normal(size=(N, D)) + x @ rng.normal(size=(k, D))
            b0, B, xm = oracles.ols(x, y)
            res = fit(Euclidean(D), x, y, tol_rel=0.0)
            np.testing.assert_allclose(res.model.x_mean, xm, atol=1e-15)
            assert np.max(np.abs(res.model.p - b0)) < 1e-8
            assert np.max(np.abs(res.model.V - B)) < 1e-8

    def test_rotation_equivariance(self):
        rng = np.random.default_rng(13)
        M = Sphere(2)
        truth, x, y = oracles.random_problem(M, rng, 1, n_obs=40, noise=0.2)
        R = Rotation.from_rotvec([0.3, -1.1, 0.7]).as_matrix()
        for kind in ("l2", "tukey"):
            a = fit(M, x, y, loss_kind=kind, tol_rel=0.0).model
            b = fit(M, x, y @ R.T, loss_kind=kind, tol_rel=0.0).model
            assert np.max(np.abs(R @ a.p - b.p)) < 1e-8
            assert np.max(np.abs(a.V @ R.T - b.V)) < 1e-8

    def test_shape_representative_invariance(self):
        rng = np.random.default_rng(17)
        M = KendallShape(6)
        truth, x, y = oracles.random_problem(M, rng, 1, n_obs=20, noise=0.05)
        spun = y * np.exp(1j * rng.uniform(0, 2 * math.pi, len(y)))[:, None]
        a = fit(M, x, y, tol_rel=0.0).model
        b = fit(M, x, spun, tol_rel=0.0).model
        assert M.dist(a.p, b.p) < 1e-8

    def test_tukey_ignores_far_outlier(self):
        rng = np.random.default_rng(19)
        M = Hyperbolic(2)
        truth, x, y = oracles.random_problem(M, rng, 1, n_obs=30, noise=0.1)
        fits = []
        for reach in (4.0, 12.0):
            yy = np.array(y)
            yy[0] = M.exp(truth.p, np.array([0.0, reach, 0.0]))
            fits.append(fit(M, x, yy, loss_kind="tukey", tol_rel=0.0))
        a, b = fits
        assert a.residual_norms[0] > a.cutoff and b.residual_norms[0] > b.cutoff
        dp, dv = mse_pair(a.model, b.model)
        assert math.sqrt(dp) < 1e-6 and math.sqrt(dv[0]) < 1e-6

    @pytest.mark.parametrize("kind", LOSSES)
    def test_trace_nonincreasing(self, kind):
        rng = np.random.default_rng(23)
        M = Sphere(2)
        truth, x, y = oracles.random_problem(M, rng, 1, n_obs=25, noise=0.3)
        res = fit(M, x, y, loss_kind=kind)
        assert res.trace
        for _, before, after, _, _ in res.trace:
            # Ties within rounding are settled by the gradient norm.
            assert after <= before + BAND * abs(before)

    @pytest.mark.parametrize("M", (Sphere(2), Hyperbolic(3), KendallShape(5)), ids=repr)
    def test_location_l2_is_intrinsic_mean(self, M, rng):
        mu0 = oracles.random_base(M, rng)
        y = M.exp(np.broadcast_to(mu0, (15, M.ambient_dim)),
                  np.array([M.random_tangent(rng, mu0, 0.3) for _ in range(15)]))
        res = fit(M, None, y)
        assert M.dist(res.model.p, intrinsic_mean(M, y)) < 1e-8

    def test_perfect_fit_with_robust_loss(self):
        M = Sphere(2)
        y = np.tile([0.0, 1.0, 0.0], (7, 1))
        res = fit(M, None, y, loss_kind="huber")
        assert res.stop_reason == "perfect_fit" and res.converged
        assert res.final_loss == 0.0

    def test_mostly_exact_robust_fit(self, rng):
        M = Sphere(2)
        y = np.tile([0.0, 0.0, 1.0], (9, 1))
        y[:2] = M.random_point(rng, size=2)
        res = fit(M, None, y, loss_kind="tukey")
        assert M.dist(res.model.p, [0.0, 0.0, 1.0]) < 1e-8

    def test_result_fields(self, rng):
        M = Hyperbolic(2)
        truth, x, y = oracles.random_problem(M, rng, 1)
        res = fit(M, x, y, loss_kind="huber")
        assert res.residual_norms.shape == (len(y),)
        assert res.sigma_hat > 0 and res.cutoff > 0
        assert M.tangent_residual(res.model.p, res.model.V[0]) < 1e-8
        d = res.to_dict()
        assert d["loss"] == "huber" and len(d["trace"]) == len(res.trace)
        assert "trace" not in res.to_dict(include_trace=False)

    def test_prediction_uses_centering(self, rng):
        M = Sphere(2)
        truth, x, y = oracles.random_problem(M, rng, 1)
        res = fit(M, x + 10.0, y)
        np.testing.assert_allclose(res.model.x_mean, (x + 10.0).mean(axis=0))
        pred = res.model.predict(x + 10.0)
        np.testing.assert_allclose(pred, M.exp(res.model.p, (x - x.mean(axis=0)) @ res.model.V),
                                   atol=1e-14)

    def test_bad_inputs(self):
        M = Sphere(2)
        with pytest.raises(ManifoldMismatchError):
            fit(M, None, np.ones((4, 4)))
        with pytest.raises(DomainError):
            fit(M, np.ones((3, 3)), np.tile([1.0, 0, 0], (3, 1)))
        with pytest.raises(DomainError):
            fit(M, [0.0, np.nan, 1.0], np.tile([1.0, 0, 0], (3, 1)))


class TestSolverConfig:
    def test_defaults(self):
        cfg = SolverConfig()
        assert (cfg.tol_rel, cfg.max_iter, cfg.center_x, cfg.gradient_mode) == \
            (1e-9, 2000, True, "jacobi")

    @pytest.mark.parametrize("kw", ({"loss_kind": "cauchy"}, {"tol_rel": -1.0},
                                    {"lambda_max": 0.0}, {"max_iter": -1},
                                    {"gradient_mode": "newton"}))
    def test_invalid(self, kw):
        with pytest.raises(DomainError):
            SolverConfig(**kw)

    def test_transport_mode_fits(self, rng):
        M = Sphere(2)
        truth = simulation_truth(M)
        x = rng.uniform(-0.5, 0.5, (20, 1))
        res = fit(M, x, truth.predict(x), gradient_mode="transport")
        assert math.sqrt(mse_pair(res.model, truth)[0]) < 1e-6


class TestMsePair:
    def test_truth(self):
        truth = simulation_truth(Hyperbolic(3))
        dp, dv = mse_pair(truth, truth)
        assert dp == 0.0 and dv == [0.0, 0.0]

    def test_intercept_offset(self):
        M = Sphere(2)
        truth = GeodesicModel(M, [1.0, 0.0, 0.0], [])
        moved = GeodesicModel(M, M.exp(truth.p, np.array([0.0, 0.0, 0.1])), [])
        assert mse_pair(moved, truth)[0] == pytest.approx(0.01, abs=1e-15)

    def test_recomputation(self, rng):
        M = Sphere(2)
        a, _, _ = oracles.random_problem(M, rng, 1)
        b, _, _ = oracles.random_problem(M, rng, 1)
        dp, dv = mse_pair(a, b)
        assert dp == pytest.approx(math.acos(float(a.p @ b.p)) ** 2, abs=1e-12)
        moved = M.transport(a.p, b.p, a.V[0])
        assert dv[0] == pytest.approx(float(np.sum((moved - b.V[0]) ** 2)), abs=1e-14)

    def test_mismatch(self):
        with pytest.raises(ManifoldMismatchError):
            mse_pair(simulation_truth(Sphere(2)), simulation_truth(Hyperbolic(2)))
