"""Elastic-net solver against closed-form and least-squares references."""

import numpy as np
import pytest

from kernagg import ConfigError, Dataset, fit_elastic_net
from kernagg.learners import StandardizedDesign

from conftest import make_dataset


def orthonormal_dataset(n=40, d=5, seed=10):
    """Dataset whose centered design has exactly orthonormal columns."""
    rng = np.random.default_rng(seed)
    raw = rng.normal(size=(n, d))
    centered = raw - raw.mean(axis=0)
    q, _ = np.linalg.qr(centered)
    X = q[:, :d]
    # columns of q stay centered: they are linear combinations of centered ones
    y = rng.normal(size=n) + X @ rng.uniform(1, 3, size=d)
    names = tuple(f"x{j + 1}" for j in range(d))
    return Dataset(X, y, names, "ortho")


class TestAgainstClosedForms:
    def test_zero_penalty_is_least_squares(self):
        ds = make_dataset(n=50, d=4, seed=1)
        fitted = fit_elastic_net(ds, alpha_mix=0.5, lam=0.0)
        design = np.column_stack([np.ones(ds.n), ds.features])
        coef, *_ = np.linalg.lstsq(design, ds.response, rcond=None)
        assert fitted.intercept == pytest.approx(coef[0], abs=1e-6)
        np.testing.assert_allclose(fitted.coef, coef[1:], atol=1e-6)

    def test_lasso_on_orthonormal_design_soft_thresholds(self):
        ds = orthonormal_dataset()
        lam = 0.8
        yc = ds.response - ds.response.mean()
        rho = ds.features.T @ yc
        expected = np.sign(rho) * np.maximum(np.abs(rho) - lam / 2.0, 0.0)
        fitted = fit_elastic_net(ds, alpha_mix=1.0, lam=lam, standardize=False)
        np.testing.assert_allclose(fitted.coef, expected, atol=1e-8)

    def test_ridge_matches_linear_solve(self):
        ds = orthonormal_dataset(seed=11)
        lam = 1.7
        xs = ds.features - ds.features.mean(axis=0)
        yc = ds.response - ds.response.mean()
        expected = np.linalg.solve(xs.T @ xs + lam * np.eye(ds.d), xs.T @ yc)
        fitted = fit_elastic_net(ds, alpha_mix=0.0, lam=lam, standardize=False)
        np.testing.assert_allclose(fitted.coef, expected, atol=1e-8)

    def test_mixed_penalty_on_orthonormal_design(self):
        # exact coordinate solution: soft_threshold(rho, lam*a/2)/(1 + lam*(1-a))
        ds = orthonormal_dataset(seed=12)
        lam, a = 0.6, 0.25
        yc = ds.response - ds.response.mean()
        rho = ds.features.T @ yc
        expected = np.sign(rho) * np.maximum(np.abs(rho) - lam * a / 2.0, 0.0)
        expected /= 1.0 + lam * (1.0 - a)
        fitted = fit_elastic_net(ds, alpha_mix=a, lam=lam, standardize=False)
        np.testing.assert_allclose(fitted.coef, expected, atol=1e-8)

    def test_huge_penalty_zeroes_coefficients(self):
        ds = make_dataset(n=30, d=3, seed=2)
        fitted = fit_elastic_net(ds, alpha_mix=1.0, lam=1e9)
        np.testing.assert_array_equal(fitted.coef, 0.0)
        assert fitted.intercept == pytest.approx(ds.response.mean())


class TestSolverBehavior:
    def test_objective_never_increases(self):
        ds = make_dataset(n=60, d=6, seed=3)
        fitted = fit_elastic_net(ds, alpha_mix=0.7, lam=0.4, record_objective=True)
        objs = np.array(fitted.sweep_objectives)
        assert fitted.sweeps == len(objs)
        assert np.all(np.diff(objs) <= 1e-10 * objs[0])

    def test_warm_start_reaches_same_solution(self):
        ds = make_dataset(n=50, d=5, seed=4)
        design = StandardizedDesign(ds)
        cold_prev = fit_elastic_net(ds, 0.5, 0.2, design=design)
        warm = fit_elastic_net(
            ds, 0.5, 0.1, design=design, warm_start=cold_prev.beta_standardized
        )
        cold = fit_elastic_net(ds, 0.5, 0.1, design=design)
        np.testing.assert_allclose(warm.coef, cold.coef, atol=1e-6)
        assert warm.intercept == pytest.approx(cold.intercept, abs=1e-6)

    def test_prediction_is_affine(self):
        ds = make_dataset(n=40, d=3, seed=5)
        fitted = fit_elastic_net(ds, 0.25, 0.05)
        queries = np.random.default_rng(6).uniform(-1, 1, size=(9, 3))
        np.testing.assert_allclose(
            fitted.predict(queries), queries @ fitted.coef + fitted.intercept, rtol=1e-13
        )

    def test_constant_feature_handled(self):
        # zero-variance column: scale falls back to 1 and its coef stays 0
        rng = np.random.default_rng(7)
        X = np.column_stack([rng.normal(size=25), np.full(25, 2.0)])
        y = 3.0 * X[:, 0] + rng.normal(size=25) * 0.1
        ds = Dataset(X, y, ("x1", "x2"), "const-col")
        fitted = fit_elastic_net(ds, 1.0, 0.3)
        assert fitted.coef[1] == 0.0

    def test_validation(self):
        ds = make_dataset(n=10, seed=0)
        with pytest.raises(ConfigError):
            fit_elastic_net(ds, alpha_mix=1.5, lam=0.1)
        with pytest.raises(ConfigError):
            fit_elastic_net(ds, alpha_mix=0.5, lam=-0.1)

    def test_label_format(self):
        ds = make_dataset(n=10, seed=0)
        fitted = fit_elastic_net(ds, 0.25, 0.0005)
        assert fitted.spec.label == "enet_a=0.25_l=0.0005"


def wide_dataset(n=30, d=60, seed=20):
    """More columns than rows: the small-lambda objective valley is flat."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, size=(n, d))
    beta = np.zeros(d)
    beta[:4] = rng.normal(size=4)
    y = X @ beta + 0.3 * rng.standard_normal(n)
    return Dataset(X, y, tuple(f"x{j + 1}" for j in range(d)), "wide")


class TestWideDesigns:
    def test_ridge_is_exact_on_wide_design(self):
        # optimality certificate: the smooth objective's gradient vanishes
        ds = wide_dataset()
        lam = 1e-4
        fitted = fit_elastic_net(ds, alpha_mix=0.0, lam=lam, standardize=False)
        assert fitted.converged
        assert fitted.sweeps == 1
        xs = ds.features - ds.features.mean(axis=0)
        yc = ds.response - ds.response.mean()
        beta = fitted.beta_standardized
        grad = -2.0 * (xs.T @ (yc - xs @ beta)) + 2.0 * lam * beta
        scale = float(np.abs(xs.T @ yc).max())
        assert np.abs(grad).max() <= 1e-9 * scale

    def test_unregularized_wide_fit_is_minimum_norm(self):
        ds = wide_dataset(seed=21)
        fitted = fit_elastic_net(ds, alpha_mix=0.0, lam=0.0, standardize=False)
        xs = ds.features - ds.features.mean(axis=0)
        yc = ds.response - ds.response.mean()
        np.testing.assert_allclose(xs @ fitted.beta_standardized, yc, atol=1e-9)
        expected = np.linalg.pinv(xs) @ yc
        np.testing.assert_allclose(fitted.beta_standardized, expected, atol=1e-8)

    def test_sweep_cap_warns_and_returns_iterate(self):
        ds = wide_dataset()
        with pytest.warns(RuntimeWarning, match="did not converge within 7 sweeps"):
            fitted = fit_elastic_net(ds, alpha_mix=1.0, lam=1e-4, max_sweeps=7)
        assert not fitted.converged
        assert fitted.sweeps == 7
        assert np.isfinite(fitted.coef).all()
        assert np.isfinite(fitted.intercept)

    def test_capped_lasso_fit_still_beats_the_null_model(self):
        ds = wide_dataset(seed=22)
        design = StandardizedDesign(ds)
        with pytest.warns(RuntimeWarning):
            fitted = fit_elastic_net(
                ds, alpha_mix=1.0, lam=1e-4, design=design, max_sweeps=50
            )
        achieved = design.objective(fitted.beta_standardized, 1.0, 1e-4)
        null = design.objective(np.zeros(ds.d), 1.0, 1e-4)
        assert achieved < 0.5 * null
