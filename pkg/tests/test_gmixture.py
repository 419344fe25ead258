import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from autoal.errors import InputError
from autoal.gmixture import (
    VAR_FLOOR, GaussianMixture, density, fit_em, sample, threshold_top_t,
)


def planted(n=10_000, seed=0):
    rng = np.random.default_rng(seed)
    comp = rng.random(n) < 0.3
    return np.where(comp, rng.normal(-2, 1.0, n), rng.normal(3, 0.5, n))


def test_single_component_is_closed_form():
    x = np.random.default_rng(0).normal(2, 3, size=500)
    gm, report = fit_em(x, 1)
    assert gm.means[0] == pytest.approx(x.mean())
    assert gm.variances[0] == pytest.approx(x.var())
    assert report.converged


def test_planted_mixture_recovered():
    gm, report = fit_em(planted(), 2, seed=1)
    order = np.argsort(gm.means)
    assert np.allclose(gm.weights[order], [0.3, 0.7], atol=0.1)
    assert np.allclose(gm.means[order], [-2, 3], atol=0.1)
    assert np.allclose(gm.variances[order], [1, 0.25], atol=0.1)
    assert report.converged


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 5))
def test_em_trace_monotone_and_simplex(seed, k):
    rng = np.random.default_rng(seed)
    x = np.concatenate([rng.normal(rng.uniform(-5, 5), rng.uniform(0.01, 2), 60) for _ in range(3)])
    gm, report = fit_em(x, k, seed=seed)
    assert all(b >= a - 1e-9 for a, b in zip(report.trace, report.trace[1:]))
    assert abs(gm.weights.sum() - 1) < 1e-9 and gm.weights.min() >= 0
    assert gm.variances.min() >= VAR_FLOOR


def test_em_degenerate_inputs():
    gm, report = fit_em(np.full(20, 0.5), 3)
    assert report.converged and gm.n_components == 1
    assert gm.variances[0] == VAR_FLOOR and gm.means[0] == 0.5
    with pytest.raises(InputError):
        fit_em([1.0, 2.0], 3)


def test_em_with_repeated_values_keeps_floor():
    x = np.array([0.0] * 50 + [1.0] * 10 + list(np.linspace(0.2, 0.8, 20)))
    gm, report = fit_em(x, 4, seed=0)
    assert gm.variances.min() >= VAR_FLOOR
    assert all(b >= a - 1e-9 for a, b in zip(report.trace, report.trace[1:]))


def test_density_values():
    gm = GaussianMixture(np.array([1.0]), np.array([0.0]), np.array([1.0]))
    assert density(gm, 0.0) == pytest.approx(0.3989422804014327, abs=1e-12)
    mix = GaussianMixture(np.array([0.3, 0.7]), np.array([-2.0, 3.0]), np.array([1.0, 0.25]))
    grid = np.linspace(-15, 15, 30001)
    assert abs(getattr(np, "trapezoid", getattr(np, "trapz", None))(density(mix, grid), grid) - 1) < 1e-3
    for k in range(2):
        single = GaussianMixture(np.array([1.0]), mix.means[k:k + 1], mix.variances[k:k + 1])
        assert np.all(density(mix, grid) >= mix.weights[k] * density(single, grid) - 1e-15)


def test_sampling():
    gm = GaussianMixture(np.array([1.0, 0.0]), np.array([-5.0, 5.0]), np.array([0.01, 0.01]))
    assert np.all(sample(gm, 1000, seed=0) < 0)
    mix = GaussianMixture(np.array([0.3, 0.7]), np.array([-2.0, 3.0]), np.array([1.0, 0.25]))
    draws = sample(mix, 100_000, seed=1)
    mean = 0.3 * -2 + 0.7 * 3
    var = 0.3 * (1 + 4) + 0.7 * (0.25 + 9) - mean ** 2
    assert abs(draws.mean() - mean) < 3 * np.sqrt(var / len(draws))
    assert np.array_equal(sample(mix, 50, seed=2), sample(mix, 50, seed=2))


def test_histogram_matches_density():
    mix = GaussianMixture(np.array([0.3, 0.7]), np.array([-2.0, 3.0]), np.array([1.0, 0.25]))
    draws = sample(mix, 100_000, seed=5)
    edges = np.linspace(-6, 6, 51)
    counts, _ = np.histogram(draws, edges)
    empirical = counts / len(draws)
    fine = np.linspace(-6, 6, 5001)
    cdf = np.concatenate([[0], np.cumsum((density(mix, fine[1:]) + density(mix, fine[:-1])) / 2
                                         * np.diff(fine))])
    expected = np.diff(np.interp(edges, fine, cdf))
    assert 0.5 * np.abs(empirical - expected).sum() < 0.02


def test_threshold_examples():
    assert threshold_top_t([3.0, 1.0, 2.0], 1.0) == 1.0
    assert threshold_top_t([1, 2, 3, 4], 0.5) == 3
    for bad in (0.0, 1.5):
        with pytest.raises(InputError):
            threshold_top_t([1, 2], bad)
    with pytest.raises(InputError):
        threshold_top_t([], 0.5)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=50), st.floats(0.01, 1.0),
       st.floats(0.01, 1.0), st.randoms())
def test_threshold_monotone_and_exchangeable(values, t1, t2, rnd):
    lo, hi = sorted((t1, t2))
    assert threshold_top_t(values, lo) >= threshold_top_t(values, hi)
    shuffled = list(values)
    rnd.shuffle(shuffled)
    assert threshold_top_t(values, lo) == threshold_top_t(shuffled, lo)
