"""Bandwidth selection: leave-one-out objective, gradient, and both tuners."""

import numpy as np
import pytest

from kernagg import (
    ConfigError,
    DataError,
    KernelSpec,
    NumericalError,
    PredictionMatrix,
    build_full,
    loo_gradient,
    loo_objective,
    predict_one,
    tune_bandwidth,
)

from conftest import make_prediction_matrix


def make_problem(n=18, M=4, seed=70):
    features = make_prediction_matrix(n=n, M=M, seed=seed)
    rng = np.random.default_rng(seed + 1)
    responses = features.values @ rng.uniform(0.5, 1.5, size=M) + 0.1 * rng.standard_normal(n)
    return features, responses


def rebuilt_loo(features, responses, alpha, sigma, h):
    """Hold out each row, aggregate the rest, predict the held-out row."""
    n = features.n
    errors = np.empty(n)
    for i in range(n):
        keep = np.arange(n) != i
        sub = PredictionMatrix(
            features.values[keep], features.machine_labels, features.bound_R0
        )
        model = build_full(sub, responses[keep], KernelSpec(alpha, sigma, h))
        errors[i] = responses[i] - predict_one(model, features.values[i])
    return float(np.mean(errors**2))


class TestObjective:
    def test_matches_rebuild_oracle(self):
        features, responses = make_problem()
        for h in (0.3, 0.9, 2.5):
            direct = loo_objective(features, responses, 2.0, 1.0, h)
            oracle = rebuilt_loo(features, responses, 2.0, 1.0, h)
            assert direct == pytest.approx(oracle, rel=1e-10)

    def test_other_kernel_shapes(self):
        features, responses = make_problem(seed=71)
        for alpha, sigma in ((1.0, 0.5), (0.5, 2.0)):
            direct = loo_objective(features, responses, alpha, sigma, 0.8)
            oracle = rebuilt_loo(features, responses, alpha, sigma, 0.8)
            assert direct == pytest.approx(oracle, rel=1e-10)

    def test_accepts_plain_arrays(self):
        features, responses = make_problem(seed=72)
        via_matrix = loo_objective(features, responses, 2.0, 1.0, 0.7)
        via_array = loo_objective(features.values, responses, 2.0, 1.0, 0.7)
        assert via_matrix == via_array

    def test_h_must_be_positive(self):
        features, responses = make_problem()
        with pytest.raises(ConfigError):
            loo_objective(features, responses, 2.0, 1.0, 0.0)

    def test_needs_four_rows(self):
        features = make_prediction_matrix(n=3, M=2, seed=73)
        with pytest.raises(DataError):
            loo_objective(features, np.zeros(3), 2.0, 1.0, 0.5)


class TestGradient:
    def test_matches_central_difference(self):
        features, responses = make_problem(seed=74)
        for h in (0.4, 1.0, 2.0):
            step = 1e-6 * h
            up = loo_objective(features, responses, 2.0, 1.0, h + step)
            down = loo_objective(features, responses, 2.0, 1.0, h - step)
            fd = (up - down) / (2.0 * step)
            grad = loo_gradient(features, responses, 2.0, 1.0, h)
            assert grad == pytest.approx(fd, rel=1e-5, abs=1e-10)

    def test_non_gaussian_kernel_gradient(self):
        features, responses = make_problem(seed=75)
        h, step = 0.9, 0.9e-6
        up = loo_objective(features, responses, 1.0, 0.7, h + step)
        down = loo_objective(features, responses, 1.0, 0.7, h - step)
        fd = (up - down) / (2.0 * step)
        assert loo_gradient(features, responses, 1.0, 0.7, h) == pytest.approx(
            fd, rel=1e-5, abs=1e-10
        )

    def test_flat_at_interior_optimum(self):
        # at the grid-refined minimizer the analytic slope must be near zero
        features, responses = make_problem(seed=76)
        hs = np.logspace(-2, 1, 400)
        objs = [loo_objective(features, responses, 2.0, 1.0, float(h)) for h in hs]
        h_star = float(hs[int(np.argmin(objs))])
        grad = loo_gradient(features, responses, 2.0, 1.0, h_star)
        scale = loo_objective(features, responses, 2.0, 1.0, h_star) / h_star
        assert abs(grad) < 0.1 * scale


class TestGradientDescent:
    def test_close_to_fine_grid_minimum(self):
        for seed in (80, 81, 82):
            features, responses = make_problem(seed=seed)
            kernel, trace = tune_bandwidth(features, responses, (2.0, 1.0))
            assert trace.converged
            tuned_obj = loo_objective(features, responses, 2.0, 1.0, kernel.h)
            hs = np.logspace(-3, 3, 200) * np.median(
                np.linalg.norm(
                    features.values[:, None, :] - features.values[None, :, :], axis=2
                )
            )
            grid_best = min(
                loo_objective(features, responses, 2.0, 1.0, float(h)) for h in hs
            )
            assert tuned_obj <= grid_best * 1.01

    def test_objective_path_non_increasing(self):
        features, responses = make_problem(seed=83)
        _, trace = tune_bandwidth(features, responses, (2.0, 1.0))
        path = np.array(trace.objective_path)
        assert np.all(np.diff(path) <= 0.0)
        assert len(trace.h_path) == len(path)

    def test_starts_at_median_distance(self):
        features, responses = make_problem(seed=84)
        _, trace = tune_bandwidth(features, responses, (2.0, 1.0))
        dists = np.linalg.norm(
            features.values[:, None, :] - features.values[None, :, :], axis=2
        )
        median = float(np.median(dists[~np.eye(features.n, dtype=bool)]))
        assert trace.h_path[0] == pytest.approx(median, rel=1e-12)

    def test_deterministic(self):
        features, responses = make_problem(seed=85)
        a, _ = tune_bandwidth(features, responses, (2.0, 1.0))
        b, _ = tune_bandwidth(features, responses, (2.0, 1.0))
        assert a.h == b.h

    def test_kernel_template_carried_through(self):
        features, responses = make_problem(seed=86)
        kernel, _ = tune_bandwidth(features, responses, (1.0, 0.6))
        assert (kernel.alpha, kernel.sigma) == (1.0, 0.6)


class TestGridSearch:
    def test_returns_argmin_of_candidates(self):
        features, responses = make_problem(seed=87)
        candidates = [0.2, 0.5, 1.0, 2.0]
        kernel, trace = tune_bandwidth(
            features, responses, (2.0, 1.0), method="grid", grid=candidates
        )
        objs = [loo_objective(features, responses, 2.0, 1.0, h) for h in candidates]
        assert kernel.h == candidates[int(np.argmin(objs))]
        assert trace.h_path == tuple(candidates)
        assert trace.objective_path == tuple(objs)

    def test_singleton_grid(self):
        features, responses = make_problem(seed=88)
        kernel, trace = tune_bandwidth(
            features, responses, (2.0, 1.0), method="grid", grid=[0.77]
        )
        assert kernel.h == 0.77
        assert trace.iterations == 1

    def test_default_grid_has_100_candidates(self):
        features, responses = make_problem(seed=89)
        _, trace = tune_bandwidth(features, responses, (2.0, 1.0), method="grid")
        assert len(trace.h_path) == 100

    def test_bad_grid_rejected(self):
        features, responses = make_problem(seed=90)
        with pytest.raises(ConfigError):
            tune_bandwidth(features, responses, (2.0, 1.0), method="grid", grid=[])
        with pytest.raises(ConfigError):
            tune_bandwidth(features, responses, (2.0, 1.0), method="grid", grid=[0.5, -1.0])


class TestTunerValidation:
    def test_unknown_method(self):
        features, responses = make_problem()
        with pytest.raises(ConfigError):
            tune_bandwidth(features, responses, (2.0, 1.0), method="newton")

    def test_bad_kernel_template(self):
        features, responses = make_problem()
        with pytest.raises(ConfigError):
            tune_bandwidth(features, responses, (-1.0, 1.0))
        with pytest.raises(ConfigError):
            tune_bandwidth(features, responses, (2.0, 0.0))

    def test_identical_rows_rejected(self):
        features = PredictionMatrix(np.ones((6, 3)), ("a", "b", "c"), 2.0)
        with pytest.raises(NumericalError):
            tune_bandwidth(features, np.arange(6.0), (2.0, 1.0))

    def test_too_few_rows(self):
        features = make_prediction_matrix(n=3, M=2, seed=91)
        with pytest.raises(DataError):
            tune_bandwidth(features, np.zeros(3), (2.0, 1.0))
