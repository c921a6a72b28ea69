import numpy as np
import pytest
from hypothesis import given, strategies as st

from gridflow import acpf
from gridflow.errors import BadSpec, CovarianceNotPSD
from gridflow.ppf.scenarios import (
    BetaUnit,
    GaussianGroup,
    OutageUnit,
    ScenarioSpec,
    WeibullUnit,
    halton,
    sample_components,
    sample_injections,
)

GEN = GaussianGroup("pg", "pv", ratio=0.2, correlation=0.2)
LOAD = GaussianGroup("load", "loads", ratio=0.1, correlation=0.2, pq_correlation=0.8)


def test_zero_ratio_reproduces_base(net30):
    spec = ScenarioSpec([GaussianGroup("pg", "pv", 0.0), GaussianGroup("load", "loads", 0.0)],
                        n=20)
    X = sample_injections(net30, spec)
    assert np.array_equal(X, np.tile(acpf.base_injection(net30), (20, 1)))


@pytest.mark.parametrize("sampler", ["mc", "qmc"])
def test_generation_statistics(net30, sampler):
    draw = sample_components(net30, ScenarioSpec([GEN, LOAD], sampler=sampler, n=12000))
    pg = draw.pg[:, net30.pv]
    ratio = pg.std(axis=0) / pg.mean(axis=0)
    assert np.all(np.abs(ratio - 0.2) <= 0.02)
    C = np.corrcoef(pg.T)
    off = C[~np.eye(len(C), dtype=bool)]
    assert np.all(np.abs(off - 0.2) <= 0.05)


def test_load_correlation_structure(net30):
    draw = sample_components(net30, ScenarioSpec([LOAD], n=12000))
    loads = np.flatnonzero(net30.pd != 0)
    i, j = loads[0], loads[1]
    assert np.corrcoef(draw.pd[:, i], draw.qd[:, i])[0, 1] == pytest.approx(0.8, abs=0.03)
    assert np.corrcoef(draw.pd[:, i], draw.pd[:, j])[0, 1] == pytest.approx(0.2, abs=0.03)


def test_renewables_and_outages(net118):
    spec = ScenarioSpec(weibull=[WeibullUnit(3, 2.0, 1.0, 20.0)],
                        beta=[BetaUnit(2, 2.0, 2.0, 20.0)],
                        outages=[OutageUnit(12, 1.0), OutageUnit(31, 0.0)], n=2000)
    draw = sample_components(net118, spec)
    assert np.all(draw.pg[:, net118.index_of(12)] == 0.0)
    np.testing.assert_array_equal(draw.pg[:, net118.index_of(31)], net118.pg[net118.index_of(31)])
    w = draw.renewable[:, net118.index_of(3)]
    b = draw.renewable[:, net118.index_of(2)]
    assert w.min() >= 0 and b.min() >= 0 and b.max() <= 0.2
    # Weibull(2, 1) mean is Gamma(1.5) = 0.8862
    assert w.mean() == pytest.approx(0.2 * 0.8862, rel=0.05)
    assert b.mean() == pytest.approx(0.1, rel=0.05)


def test_outage_frequency(net118):
    draw = sample_components(net118, ScenarioSpec(outages=[OutageUnit(12, 0.05)], n=20000))
    frac = np.mean(draw.pg[:, net118.index_of(12)] == 0.0)
    assert frac == pytest.approx(0.05, abs=0.006)


def test_qmc_is_deterministic_and_unbiased(net30):
    spec = ScenarioSpec([GEN, LOAD], sampler="qmc", n=3000)
    a, b = sample_injections(net30, spec), sample_injections(net30, spec)
    assert np.array_equal(a, b)
    mc = sample_injections(net30, ScenarioSpec([GEN, LOAD], sampler="mc", n=3000, seed=4))
    se = np.sqrt(a.var(axis=0) / 3000 + mc.var(axis=0) / 3000)
    diff = np.abs(a.mean(axis=0) - mc.mean(axis=0))
    varying = se > 0
    assert np.all(diff[varying] <= 3 * se[varying] + 1e-12)


def test_halton_skip_and_range():
    pts = halton(100, 4)
    assert pts.shape == (100, 4) and pts.min() > 0 and pts.max() < 1
    assert np.array_equal(halton(10, 4, skip=5)[5:], halton(5, 4, skip=10))


def test_mc_seeds_differ(net30):
    a = sample_injections(net30, ScenarioSpec([GEN], n=50, seed=1))
    b = sample_injections(net30, ScenarioSpec([GEN], n=50, seed=2))
    assert not np.array_equal(a, b)


def test_non_psd_correlation(net30):
    with pytest.raises(CovarianceNotPSD):
        sample_injections(net30, ScenarioSpec([GaussianGroup("pg", "pv", 0.1, -0.9)], n=5))


@pytest.mark.parametrize("bad", [
    {"gaussian": [{"quantity": "pg", "colour": 1}]},
    {"sampler": "sobol"},
    {"extra": 1},
])
def test_bad_specs(net30, bad):
    with pytest.raises(BadSpec):
        spec = ScenarioSpec.from_dict({"n": 5, **bad})
        sample_injections(net30, spec)


def test_units_on_slack_rejected(net30):
    with pytest.raises(BadSpec):
        sample_injections(net30, ScenarioSpec(weibull=[WeibullUnit(1)], n=3))
    with pytest.raises(BadSpec):
        sample_injections(net30, ScenarioSpec(outages=[OutageUnit(2, 1.5)], n=3))


@given(st.floats(0, 0.3), st.floats(-0.2, 0.9), st.integers(0, 1000))
def test_spec_dict_round_trip_and_digest(ratio, rho, seed):
    spec = ScenarioSpec([GaussianGroup("pg", "pv", ratio, rho)], seed=seed, n=10)
    again = ScenarioSpec.from_dict(spec.to_dict())
    assert again == spec and again.digest() == spec.digest()
