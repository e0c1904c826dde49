import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

import oracles
from robustci.interval import (
    CollinearTargetError,
    ThresholdRule,
    confidence_interval,
    decorrelate,
    invert_monotone_score,
    invert_score,
    score_bound,
    score_statistic,
)
from robustci.model import Dataset, DesignSpec, generate_dataset, noise_preset, split

# atanh(1.5 sqrt(ln 40) / 10), frozen from math.atanh
HALF_WIDTH_N100 = 0.29648959678412906


def make(n=60, p=3, eps=0.1, family="gaussian", seed=0, b=None):
    b = np.zeros(p) if b is None else b
    return generate_dataset(DesignSpec(p), noise_preset(family, eps), b, n, seed)


class TestThreshold:
    def test_values(self):
        assert_allclose(ThresholdRule.NON_ASYMPTOTIC.threshold(0.05), 2.880968373959762)
        assert_allclose(ThresholdRule.GAUSSIAN_APPROX.threshold(0.05), 1.959963984540054)
        assert ThresholdRule("alg1-ga").method == "alg1-ga"

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.5])
    def test_alpha_range(self, alpha):
        with pytest.raises(ValueError):
            ThresholdRule.NON_ASYMPTOTIC.threshold(alpha)


class TestDecorrelate:
    def test_orthogonal_nuisance(self):
        x = np.array([1.0, -1.0, 1.0, -1.0])
        ds = Dataset(np.array([0.1, 0.2, -0.3, 0.0]), np.column_stack([x, np.ones(4)]))
        pair = decorrelate(split(ds, 1))
        assert np.array_equal(pair.x_tilde, x)

    def test_noiseless(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((30, 4))
        y = X @ np.array([1.5, -2.0, 0.3, 4.0])
        pair = decorrelate(split(Dataset(y, X), 1))
        assert_allclose(pair.y_tilde, 1.5 * pair.x_tilde, atol=1e-9)

    def test_sample_orthogonality(self):
        for seed in range(100):
            ds = make(n=40, p=4, eps=0.2, seed=seed)
            s = split(ds, 1 + seed % 4)
            pair = decorrelate(s)
            assert np.max(np.abs(s.W.T @ pair.x_tilde)) <= 1e-8 * ds.n
            ref = oracles.normal_equations(s.x, s.W)
            assert_allclose(pair.alpha_hat, ref, atol=1e-8)

    def test_collinear(self):
        w = np.arange(1.0, 7.0)
        ds = Dataset(np.zeros(6), np.column_stack([2 * w, w, w**2]))
        with pytest.raises(CollinearTargetError, match="collinear"):
            decorrelate(split(ds, 1))

    def test_n_not_above_p(self):
        with pytest.raises(ValueError):
            decorrelate(split(Dataset(np.zeros(3), np.eye(3)), 1))


class TestScore:
    def test_exact_fit_zero(self):
        x = np.array([0.5, -1.0, 2.0])
        assert score_statistic((x, 3.0 * x), 3.0) == 0.0

    def test_single_term(self):
        assert_allclose(score_statistic(([1.0], [0.0]), 1.0), 0.7615941559557649, rtol=1e-15)

    def test_bound(self):
        assert_allclose(score_bound(([1.0, 1.0], [0.0, 0.0])), math.sqrt(2))

    @given(st.integers(0, 100_000))
    @settings(max_examples=200, deadline=None)
    def test_monotone_and_bounded(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 30))
        x, y = rng.standard_normal(n), rng.standard_cauchy(n)
        beta = rng.normal() * 10
        s0, s1 = score_statistic((x, y), beta), score_statistic((x, y), beta + 1)
        assert s1 >= s0 - 1e-12
        assert abs(s0) <= score_bound((x, y)) + 1e-12


class TestInvert:
    def test_closed_form(self):
        ci = invert_score((np.ones(100), np.zeros(100)), 0.05)
        assert_allclose([ci.lower, ci.upper], [-HALF_WIDTH_N100, HALF_WIDTH_N100], atol=1e-9)
        assert ci.method == "alg1" and ci.bounded

    def test_closed_form_grid(self):
        x, y = np.ones(100), np.zeros(100)
        c = ThresholdRule.NON_ASYMPTOTIC.threshold(0.05)
        grid = np.arange(-0.4, 0.4, 1e-7)
        s = oracles.tanh_score_values(x, y, grid)
        inside = grid[(s >= -c) & (s <= c)]
        assert abs(inside[0] + HALF_WIDTH_N100) <= 1e-7
        assert abs(inside[-1] - HALF_WIDTH_N100) <= 1e-7

    def test_unbounded(self):
        ci = invert_score((np.ones(2), np.zeros(2)), 0.05)
        assert ci.lower_unbounded and ci.upper_unbounded
        assert ci.lower == -math.inf and ci.upper == math.inf

    def test_degenerate(self):
        with pytest.raises(ValueError):
            invert_score((np.zeros(5), np.ones(5)), 0.05)

    @given(st.integers(0, 100_000))
    @settings(max_examples=100, deadline=None)
    def test_endpoint_consistency(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(12, 60))
        x = rng.standard_normal(n)
        y = 2.0 * x + rng.standard_cauchy(n)
        ci = invert_score((x, y), 0.05)
        c = ThresholdRule.NON_ASYMPTOTIC.threshold(0.05)
        if not ci.lower_unbounded:
            assert score_statistic((x, y), ci.lower) >= -c - 1e-7
            assert score_statistic((x, y), ci.lower - 1e-6) < -c
        if not ci.upper_unbounded:
            assert score_statistic((x, y), ci.upper) <= c + 1e-7
            assert score_statistic((x, y), ci.upper + 1e-6) > c

    def test_true_value_inside_when_score_small(self):
        rng = np.random.default_rng(3)
        c = ThresholdRule.NON_ASYMPTOTIC.threshold(0.05)
        for _ in range(200):
            x = rng.standard_normal(40)
            y = -1.0 * x + rng.standard_normal(40)
            ci = invert_score((x, y), 0.05)
            if abs(score_statistic((x, y), -1.0)) <= c:
                assert ci.contains(-1.0)

    def test_flat_plateau_semantics(self):
        # single huge-scale point: S saturates quickly; still leftmost/rightmost
        x = np.array([1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0])
        y = np.array([0.0] * 9 + [1e6])
        ci = invert_monotone_score(x, y, 2.0, 0.05, "t")
        assert score_statistic((x, y), ci.lower) >= -2.0
        assert score_statistic((x, y), ci.upper) <= 2.0


class TestConfidenceInterval:
    def test_noiseless(self):
        rng = np.random.default_rng(4)
        for n in (100, 400):
            X = rng.standard_normal((n, 5))
            b = np.array([2.0, 1.0, -1.0, 0.5, 3.0])
            ci = confidence_interval(Dataset(X @ b, X), 1)
            assert ci.contains(2.0) and ci.length < 10 / math.sqrt(n)

    def test_permutation_invariant(self):
        ds = make(n=80, p=4, eps=0.3, seed=5)
        perm = np.random.default_rng(0).permutation(ds.n)
        a = confidence_interval(ds, 2)
        b = confidence_interval(Dataset(ds.y[perm], ds.X[perm]), 2)
        assert_allclose([a.lower, a.upper], [b.lower, b.upper], atol=1e-8)

    def test_nested_in_alpha(self):
        for seed in range(10):
            ds = make(n=100, p=3, eps=0.2, seed=seed)
            wide = confidence_interval(ds, 1, 0.01)
            narrow = confidence_interval(ds, 1, 0.05)
            assert wide.lower <= narrow.lower and narrow.upper <= wide.upper

    def test_ga_narrower(self):
        ds = make(n=100, p=3, eps=0.2, seed=7)
        a = confidence_interval(ds, 1, rule=ThresholdRule.NON_ASYMPTOTIC)
        g = confidence_interval(ds, 1, rule=ThresholdRule.GAUSSIAN_APPROX)
        assert g.method == "alg1-ga" and a.lower < g.lower and g.upper < a.upper

    @pytest.mark.parametrize("seed", range(5))
    def test_translation(self, seed):
        ds = make(n=80, p=4, eps=0.3, family="cauchy", seed=seed)
        delta = np.random.default_rng(seed).uniform(-5, 5, 4)
        a = confidence_interval(ds, 2)
        b = confidence_interval(Dataset(ds.y + ds.X @ delta, ds.X), 2)
        assert_allclose([b.lower, b.upper], [a.lower + delta[1], a.upper + delta[1]], atol=1e-6)

    @pytest.mark.parametrize("seed", range(5))
    def test_sign_flip(self, seed):
        ds = make(n=80, p=4, eps=0.3, seed=seed)
        X = ds.X.copy()
        X[:, 0] *= -1
        a = confidence_interval(ds, 1)
        b = confidence_interval(Dataset(ds.y, X), 1)
        assert_allclose([b.lower, b.upper], [-a.upper, -a.lower], atol=1e-6)

    def test_validation(self):
        ds = make()
        with pytest.raises(ValueError):
            confidence_interval(ds, 0)
        with pytest.raises(ValueError):
            confidence_interval(ds, 1, alpha=1.0)
        with pytest.raises(ValueError):
            confidence_interval(Dataset(np.zeros(3), np.ones((3, 3)) + np.eye(3)), 1)
