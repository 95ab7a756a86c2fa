import numpy as np
import pytest
from scipy import stats

from oracles import compound_poisson_pmf, geometric_sum_pmf
from perishable import (CompoundPoissonDemand, CompoundPoissonSpec, DiscreteDist,
                        ForecastCompoundPoissonDemand, InfoSet, conditional_pmf,
                        exponential_demand, iid_demand, inverse_cdf, point_mass_demand,
                        sample_path)
from perishable.demand import (TAIL_TOL, compound_poisson_table, export_pmf_csv,
                               negative_binomial_table, poisson_table)
from perishable.errors import CapabilityError, ConfigurationError, ValidationError

SPEC = CompoundPoissonSpec((2.6, 5.5, 1.9, 3.2, 3.7, 0.1, 0.0), 0.32)


def test_infoset_length_checked():
    InfoSet(3, (1, 2))
    with pytest.raises(ValidationError):
        InfoSet(3, (1,))
    with pytest.raises(ValidationError):
        InfoSet(0)


def test_discrete_dist_basics():
    d = DiscreteDist([0.2, 0.3, 0.5])
    assert d.support_max == 2
    assert d.mean() == pytest.approx(1.3)
    assert d.cdf(-0.5) == 0 and d.cdf(1.7) == pytest.approx(0.5) and d.cdf(9) == 1
    assert d.inverse_cdf(0.2) == 0
    assert d.inverse_cdf(0.21) == 1
    assert d.inverse_cdf(1.0) == 2
    assert d.expected_excess(0.5) == pytest.approx(0.3 * 0.5 + 0.5 * 1.5)
    assert d.pmf_at(1) == pytest.approx(0.3) and d.pmf_at(1.5) == 0 and d.pmf_at(7) == 0


@pytest.mark.parametrize("bad", [[], [0.5, 0.4], [1.2, -0.2]])
def test_discrete_dist_rejects_bad_pmf(bad):
    with pytest.raises(ConfigurationError):
        DiscreteDist(bad)


def test_inverse_cdf_rejects_bad_probability():
    with pytest.raises(ValidationError):
        DiscreteDist([1.0]).inverse_cdf(0.0)


def test_negative_binomial_matches_convolution():
    theta = SPEC.theta
    for n in (1, 3, 7):
        ref = geometric_sum_pmf(n, theta, 40)
        got = negative_binomial_table(n, theta).pmf
        m = min(40, got.size) - 1
        assert np.allclose(got[:m], ref[:m], atol=1e-12)
    assert negative_binomial_table(0, theta).pmf.tolist() == [1.0]


@pytest.mark.parametrize("lam", [0.1, 1.9, 5.5])
def test_compound_poisson_matches_count_mixture(lam):
    theta = SPEC.theta
    got = compound_poisson_table(lam, theta).pmf
    ref = compound_poisson_pmf(lam, theta, got.size)
    assert np.allclose(got[:-1], ref[:-1], atol=1e-12)
    # folded tail is below the tolerance
    assert 0 <= got[-1] - ref[-1] < TAIL_TOL


def test_tabulation_folds_tail():
    tb = poisson_table(3.0)
    assert tb.pmf.sum() == pytest.approx(1.0, abs=1e-15)
    assert stats.poisson(3.0).sf(tb.support_max) < TAIL_TOL
    with pytest.raises(ConfigurationError):
        poisson_table(3.0, bound=4)


def test_point_mass_and_iid():
    m = point_mass_demand([0, 3, 1])
    assert m.distribution(2).inverse_cdf(0.5) == 3
    assert conditional_pmf(m, 2, InfoSet(1), 3) == 1.0
    with pytest.raises(ConfigurationError):
        point_mass_demand([1.5])
    m = iid_demand([0.5, 0.5], 4)
    assert m.horizon == 4 and inverse_cdf(m, 4, None, 0.6) == 1


def test_sample_path_is_a_function_of_the_seed():
    m = ForecastCompoundPoissonDemand(SPEC, 28, 3)
    d1, i1 = sample_path(m, (7, 3))
    d2, i2 = sample_path(m, (7, 3))
    d3, _ = sample_path(m, (7, 4))
    assert np.array_equal(d1, d2) and i1 == i2
    assert not np.array_equal(d1, d3)


def test_forecast_model_conditional_laws():
    m = ForecastCompoundPoissonDemand(SPEC, 28, 3)
    d, infos = m.sample_path(0)
    info = infos[4]
    assert len(info.signals) == 5 + 3 - 1
    for s in range(5, 8):
        n = info.signals[s - 1]
        assert m.distribution(s, info) is negative_binomial_table(n, SPEC.theta)
    assert m.distribution(8, info) is compound_poisson_table(SPEC.arrival_mean(8),
                                                             SPEC.theta, None)
    # the realized demand is consistent with the forecast count
    for t, it in enumerate(infos, start=1):
        if it.signals[t - 1] == 0:
            assert d[t - 1] == 0
    with pytest.raises(CapabilityError):
        m.initial_info()


def test_forecast_sampling_matches_marginal_law():
    m = ForecastCompoundPoissonDemand(SPEC, 7, 3)
    draws = np.array([m.sample_path((1, i))[0] for i in range(20000)])
    for s in (1, 2):
        law = CompoundPoissonDemand(SPEC, 7).distribution(s)
        mean, sd = law.mean(), np.sqrt(np.dot((np.arange(law.pmf.size) - law.mean()) ** 2,
                                              law.pmf))
        assert abs(draws[:, s - 1].mean() - mean) < 4 * sd / np.sqrt(len(draws))
    assert np.all(draws[:, 6] == 0)


def test_forecast_dp_hooks_are_consistent():
    m = ForecastCompoundPoissonDemand(SPEC, 6, 3)
    init = m.dp_initial(count_cap=4)
    assert sum(p for _, p in init) == pytest.approx(1.0)
    for t in range(1, 6):
        states = set(m.dp_signal_states(t, 4))
        for z in states:
            nxt = m.dp_signal_transition(t, z, 4)
            assert sum(p for _, p in nxt) == pytest.approx(1.0)
            assert all(z2 in set(m.dp_signal_states(t + 1, 4)) for z2, _ in nxt)


def test_continuous_model():
    m = exponential_demand([5.0, 6.0])
    assert m.integer is False
    assert m.distribution(2).inverse_cdf(0.5) == pytest.approx(6 * np.log(2))
    assert m.distribution(1).expected_excess(0.0) == pytest.approx(5.0, rel=1e-8)
    with pytest.raises(CapabilityError):
        m.pmf(1)


def test_export_pmf_csv(tmp_path):
    path = tmp_path / "pmf.csv"
    export_pmf_csv(iid_demand([0.25, 0.75], 2), path)
    rows = path.read_text().splitlines()
    assert rows[0] == "period,value,probability" and len(rows) == 5


def test_reference_values():
    assert conditional_pmf(point_mass_demand([0, 0]), 2, InfoSet(1), 0) == 1.0
    assert compound_poisson_table(0.0, SPEC.theta).pmf_at(0) == 1.0
    theta = 0.32 / 1.32
    assert negative_binomial_table(2, theta).pmf_at(0) == pytest.approx((1 - theta) ** 2,
                                                                         abs=1e-12)
    assert (1 - theta) ** 2 == pytest.approx(0.5739, abs=1e-4)
    ex = exponential_demand([5.0, 6.0])
    assert inverse_cdf(ex, 1, None, 5 / 6) == pytest.approx(8.959, abs=1e-3)
    assert inverse_cdf(ex, 2, None, 5 / 6) == pytest.approx(10.751, abs=1e-3)
    assert inverse_cdf(point_mass_demand([3]), 1, None, 0.3) == 3


def test_forecast_pmf_matches_convolution_up_to_six():
    m = ForecastCompoundPoissonDemand(SPEC, 7, 3)
    for n in range(7):
        info = InfoSet(1, (), (n, 0, 0))
        got = m.distribution(1, info).pmf
        ref = geometric_sum_pmf(n, SPEC.theta, got.size)
        assert np.allclose(got[:-1], ref[:-1], atol=1e-10)


def test_inverse_cdf_right_continuity():
    law = compound_poisson_table(3.7, SPEC.theta)
    for v in range(law.support_max + 1):
        if law.pmf[v] > 0:
            assert law.inverse_cdf(law.cdf(v)) <= v


def test_sample_mean_matches_analytic_mean():
    m = CompoundPoissonDemand(SPEC, 7)
    draws = np.array([m.sample_path(i)[0][1] for i in range(20000)])
    sd = np.sqrt(5.5 * (2 * 0.32 ** 2 + 0.32))     # compound-Poisson variance
    assert abs(draws.mean() - 5.5 * 0.32) < 3 * sd / np.sqrt(draws.size)
