"""Synthetic benchmark generators: shapes, formula transcription, streams."""

import math

import numpy as np
import pytest

from kernagg import ConfigError, MIN_DIMENSION, NumericalError, SimModelSpec, generate, signal
from kernagg.simgen import DEFAULT_SHAPES


def scalar_signal(model_id, x):
    """Independent scalar transcription of each signal, index by index.

    Written with explicit 1-based indexing (s(i) = x[i-1]) and math.*
    calls so a transcription slip in the vectorized code cannot hide.
    """
    s = lambda i: float(x[i - 1])  # noqa: E731
    if model_id == 1:
        return (
            s(1) ** 2
            - s(3) ** 2
            + 3 * s(4) * math.exp(-s(5))
            - s(7) ** 3 * math.exp(-s(8) * s(9) + s(5) * s(10))
        )
    if model_id == 2:
        total = 0.0
        for j in range(1, 6):
            total += 3 * s(2 * j) ** 3 * math.exp(s(30 - j) - s(2 * j + 1))
            total -= 2 * s(2 * j - 1) ** 3 * math.exp(s(2 * j) - s(30 - 3 * j))
        return total
    if model_id == 3:
        inner = 1.0
        for j in range(1, 6):
            inner += (1 + s(5 + j)) / (2 - s(45 + j))
        return (1 - s(1) ** 2 + 2 * s(3) * s(4)) / (1.1 + s(5)) - 2 * math.sqrt(
            inner
        ) * math.exp(-s(10) + s(20) - s(30))
    if model_id == 4:
        return (s(1) ** 2 - s(2) ** 2) * (1 - math.exp(-s(5) * s(7))) + 3 * s(3) * math.exp(
            -sum(s(10 * j) for j in range(1, 11))
        )
    if model_id == 5:
        total = (1 + math.sin(s(1) + s(2))) / (1 - math.sin(s(1) * s(2)))
        for j in range(1, 11):
            total -= (2**j + 1) / (2**j - 1) * s(5 * j) * s(10 * j) * s(j)
        return total
    raise AssertionError(model_id)


class TestSpecValidation:
    def test_defaults(self):
        for model_id, (n, d) in DEFAULT_SHAPES.items():
            spec = SimModelSpec(model_id)
            assert (spec.n, spec.d) == (n, d)

    def test_bad_model(self):
        with pytest.raises(ConfigError):
            SimModelSpec(0)
        with pytest.raises(ConfigError):
            SimModelSpec(6)

    def test_dimension_floor(self):
        for model_id, d_min in MIN_DIMENSION.items():
            SimModelSpec(model_id, d=d_min)  # smallest legal d
            with pytest.raises(ConfigError):
                SimModelSpec(model_id, d=d_min - 1)

    def test_model2_min_dimension_is_29(self):
        # largest index referenced is X_{30-1} = X_29, so d=29 is legal
        ds = generate(SimModelSpec(2, n=10, d=29, seed=0))
        assert ds.d == 29


class TestSignals:
    def test_matches_scalar_transcription(self):
        rng = np.random.default_rng(11)
        for model_id in range(1, 6):
            d = MIN_DIMENSION[model_id]
            X = rng.uniform(-1.0, 1.0, size=(7, d))
            expected = [scalar_signal(model_id, row) for row in X]
            np.testing.assert_allclose(signal(model_id, X), expected, rtol=1e-13)

    def test_model3_at_origin(self):
        # (1-0+0)/1.1 - 2*sqrt(1 + 5*(1/2)) * 1
        x = np.zeros((1, 50))
        expected = 1.0 / 1.1 - 2.0 * math.sqrt(3.5)
        assert signal(3, x)[0] == pytest.approx(expected, rel=1e-15)

    def test_model1_single_vector(self):
        x = np.zeros(10)
        x[3] = 0.5  # only the 3*X4*exp(-X5) term survives
        assert signal(1, x)[0] == pytest.approx(1.5)

    def test_width_check(self):
        with pytest.raises(ConfigError):
            signal(1, np.zeros((3, 9)))

    def test_model5_denominator_guard(self):
        x = np.zeros((1, 100))
        x[0, 0] = 1.3
        x[0, 1] = 1.3  # sin(1.69) ~ 0.993, denominator ~ 0.007
        with pytest.raises(NumericalError):
            signal(5, x)


class TestGenerate:
    def test_shapes_and_names(self):
        ds = generate(SimModelSpec(1, seed=4))
        assert (ds.n, ds.d) == (600, 10)
        assert ds.column_names[0] == "x1"
        assert ds.column_names[-1] == "x10"
        assert ds.name == "model1"

    def test_deterministic(self):
        a = generate(SimModelSpec(2, n=50, seed=8))
        b = generate(SimModelSpec(2, n=50, seed=8))
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.response, b.response)

    def test_seed_changes_draw(self):
        a = generate(SimModelSpec(1, n=50, seed=0))
        b = generate(SimModelSpec(1, n=50, seed=1))
        assert not np.array_equal(a.features, b.features)

    def test_features_shared_across_models(self):
        # same (n, d, seed) must give the same feature draw for every model,
        # so model comparisons differ only in the signal
        a = generate(SimModelSpec(4, n=100, d=100, seed=3))
        b = generate(SimModelSpec(5, n=100, d=100, seed=3))
        np.testing.assert_array_equal(a.features, b.features)

    def test_features_in_cube(self):
        ds = generate(SimModelSpec(3, n=200, seed=5))
        assert ds.features.min() >= -1.0
        assert ds.features.max() <= 1.0

    def test_noise_is_standard_normal(self):
        spec = SimModelSpec(1, n=20000, seed=12)
        ds = generate(spec)
        noise = ds.response - signal(1, ds.features)
        assert abs(noise.mean()) < 4.0 / math.sqrt(ds.n)
        assert noise.std() == pytest.approx(1.0, abs=0.02)

    def test_response_is_signal_plus_noise_structure(self):
        # regenerating with the same seed but different model reuses the
        # noise stream as well: responses differ exactly by signal difference
        a = generate(SimModelSpec(4, n=80, d=100, seed=9))
        b = generate(SimModelSpec(5, n=80, d=100, seed=9))
        delta_resp = a.response - b.response
        delta_sig = signal(4, a.features) - signal(5, b.features)
        np.testing.assert_allclose(delta_resp, delta_sig, atol=1e-12)
