import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.stats import norm

from gridflow.errors import AllTargetsNearZero, DegenerateSamples, NoSamples, ShapeMismatch
from gridflow.numerics import Bernoulli, Rng, sample
from gridflow.ppf.stats import (
    Limit,
    armse,
    awd,
    kde,
    kde_curve,
    mape,
    risk_assess,
    silverman_bandwidth,
    variance_coefficient_scan,
    violation_record,
    wasserstein_1d,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def brute_w1(a, b):
    return min(np.mean(np.abs(np.asarray(a) - np.asarray(b)[list(p)]))
               for p in itertools.permutations(range(len(b))))


def test_identical_inputs_give_zero():
    Y = np.random.default_rng(0).normal(size=(30, 4)) + 3
    assert armse(Y, Y) == 0 and awd(Y, Y) == 0
    assert np.all(mape(Y, Y)[0] == 0)


@given(st.floats(-10, 10), arrays(float, 25, elements=finite))
def test_constant_shift(c, y):
    assert armse(y + c, y) == pytest.approx(abs(c), abs=1e-9)
    assert awd(y + c, y) == pytest.approx(abs(c), abs=1e-9)


def test_w1_matches_exhaustive_assignment():
    rng = np.random.default_rng(1)
    for _ in range(200):
        n = int(rng.integers(1, 8))
        a, b = rng.normal(size=n), rng.normal(size=n)
        assert abs(wasserstein_1d(a, b) - brute_w1(a, b)) < 1e-12


@given(arrays(float, st.integers(2, 60), elements=finite), st.integers(0, 1000))
def test_awd_against_shuffled_self_is_zero(y, seed):
    shuffled = np.random.default_rng(seed).permutation(y)
    assert awd(shuffled, y) == 0.0


def test_shape_errors():
    with pytest.raises(ShapeMismatch):
        armse(np.zeros((3, 2)), np.zeros((3, 3)))
    with pytest.raises(ShapeMismatch):
        wasserstein_1d(np.zeros(3), np.zeros(4))


def test_mape_values_and_exclusions():
    Y = np.array([[1.0, 0.0], [2.0, 1e-9], [4.0, 2.0]])
    Yh = np.array([[1.1, 5.0], [1.8, 5.0], [4.0, 2.5]])
    vals, excluded = mape(Yh, Y)
    assert vals[0] == pytest.approx(100 * (0.1 + 0.1 + 0) / 3)
    assert vals[1] == pytest.approx(25.0)
    assert excluded.tolist() == [0, 2]
    with pytest.raises(AllTargetsNearZero):
        mape(np.ones((2, 2)), np.zeros((2, 2)))


def test_kde_recovers_normal_pdf():
    x = np.random.default_rng(2).normal(size=100_000)
    grid = np.linspace(-3, 3, 121)
    assert np.max(np.abs(kde(x, grid) - norm.pdf(grid))) < 0.01


def test_kde_symmetry():
    grid = np.linspace(-2, 2, 81)
    d = kde([-0.7, 0.7], grid)
    assert np.max(np.abs(d - d[::-1])) < 1e-12


@given(arrays(float, st.integers(2, 200), elements=st.floats(-50, 50)))
def test_kde_normalization(x):
    if np.all(x == x[0]) or silverman_bandwidth(x) < 1e-6 * max(1.0, np.ptp(x)):
        return
    grid, dens = kde_curve(x, n_points=4096)
    assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-3)


@given(arrays(float, st.integers(2, 100), elements=st.integers(-320, 320).map(lambda k: k / 64)),
       st.integers(-640, 640).map(lambda k: k / 64))
def test_kde_location_equivariance(x, c):
    # dyadic values keep the shift itself exact
    if np.all(x == x[0]):
        return
    grid = np.linspace(-8, 8, 33)
    a = kde(x, grid)
    b = kde(x + c, grid + c, bandwidth=silverman_bandwidth(x))
    assert np.max(np.abs(a - b)) < 1e-12


def test_kde_degenerate():
    with pytest.raises(DegenerateSamples):
        kde([2.0, 2.0, 2.0], [0.0])
    with pytest.raises(DegenerateSamples):
        kde_curve([1.0])


def test_limit_below_all_samples():
    r = violation_record(np.linspace(1, 2, 50), Limit("v", 0.5, "lower"))
    assert r.probability == 0 and r.ci == (0.0, 0.0)
    assert not r.estimable and not r.converged


def test_bernoulli_stream_risk():
    hits = sample(Rng(0).child("risk"), Bernoulli(0.04), 5000)
    depth = Rng(0).child("depth").uniform(5000) * 0.01
    v = np.where(hits == 1, 0.9 - depth, 1.0)
    r = violation_record(v, Limit("v", 0.9, "lower"))
    assert abs(r.probability - 0.04) <= 0.006
    p = r.probability
    assert r.variance_coefficient == pytest.approx(np.sqrt((1 - p) / (5000 * p)))
    assert np.sqrt(0.96 / (5000 * 0.04)) == pytest.approx(0.069, abs=5e-4)
    half = 1.959963984540054 * np.sqrt(p * (1 - p) / 5000)
    assert r.ci == pytest.approx((p - half, p + half))
    assert r.depth_ci[0] <= r.mean_depth <= r.depth_ci[1]
    assert 0 < r.mean_depth < 0.01


def test_upper_limit_and_convergence_flag():
    v = np.concatenate([np.full(99_000, 1.0), np.full(1_000, 3.0)])
    r = violation_record(v, Limit("s", 2.0, "upper"))
    assert r.probability == pytest.approx(0.01) and r.mean_depth == pytest.approx(1.0)
    assert r.converged == (r.variance_coefficient < 0.01)


@given(arrays(float, st.integers(1, 80), elements=finite), finite)
def test_probabilities_stay_in_unit_interval(v, bound):
    for kind in ("lower", "upper"):
        r = violation_record(v, Limit("q", bound, kind))
        assert 0 <= r.ci[0] <= r.probability <= r.ci[1] <= 1


def test_risk_assess_errors():
    with pytest.raises(NoSamples):
        risk_assess({}, [])
    with pytest.raises(NoSamples):
        violation_record(np.array([]), Limit("q", 0))


def test_variance_scan_deterministic_samples():
    S = np.ones((500, 3)) * [1.0, 2.0, 3.0]
    assert all(v == 0 for _, v in variance_coefficient_scan(S, [10, 100, 500]))


def test_variance_scan_sqrt_law():
    S = np.random.default_rng(4).normal(10, 1, size=(400, 20))
    (_, v100), (_, v400) = variance_coefficient_scan(S, [100, 400])
    assert v100 / v400 == pytest.approx(2.0, rel=0.2)


def test_variance_scan_decreases_on_average():
    counts = [50, 100, 200, 400, 800]
    runs = [[v for _, v in variance_coefficient_scan(
        np.random.default_rng(s).normal(5, 2, size=(800, 5)), counts)] for s in range(10)]
    assert np.all(np.diff(np.mean(runs, axis=0)) < 0)


def test_variance_scan_rejects_bad_counts():
    with pytest.raises(ValueError):
        variance_coefficient_scan(np.ones((10, 2)), [5, 3])
    with pytest.raises(ValueError):
        variance_coefficient_scan(np.ones((10, 2)), [20])
