import math

import numpy as np
import pytest
from scipy import stats

from perishable import (CompoundPoissonDemand, CompoundPoissonSpec, ContinuousDemand,
                        CostParams, TransformedCostParams, chao_guarantee,
                        check_cost_condition, check_fractile_monotone,
                        check_mixed_condition, exponential_demand, guarantee_report,
                        iid_demand, point_mass_demand, uniform_demand)
from perishable.fifo import excess_probability, mixed_threshold
from perishable.errors import ValidationError

EX2 = TransformedCostParams(p=5.0, h=1.0, w=5.0, beta=1.0)


def ex2_model(T=10):
    return exponential_demand([5.0 if t % 2 == 0 else 6.0 for t in range(T)])


@pytest.mark.parametrize("beta, expected", [(0.9, 2.214), (0.95, 2.125), (0.99, 2.029)])
def test_chao_constant_cost_setting(beta, expected):
    par = CostParams(c=1.0, p=5.0, h=0.0, w=0.0, beta=beta)
    assert chao_guarantee(5, par) == pytest.approx(expected, abs=1e-3)
    assert check_cost_condition(par).holds and check_cost_condition(par).original_holds


def test_chao_alternating_exponential_and_mixed_condition():
    assert chao_guarantee(5, EX2) == pytest.approx(2.3, abs=1e-12)
    mc = check_mixed_condition(ex2_model(), EX2)
    assert mc.gamma == pytest.approx(0.882, abs=0.01)
    assert mc.threshold == pytest.approx(1.338, abs=0.05)
    assert mc.holds
    assert not check_cost_condition(EX2).holds


def test_chao_formula_properties():
    rng = np.random.default_rng(0)
    for _ in range(200):
        K = int(rng.integers(2, 8))
        par = TransformedCostParams(1.0, float(rng.choice([0.0, rng.uniform(0, 5)])),
                                    float(rng.uniform(0, 5)), 1.0)
        g = chao_guarantee(K, par)
        assert g >= 2
        assert (g == 2) == (K == 2 or par.h == 0)
    with pytest.raises(ValidationError):
        chao_guarantee(1, EX2)


def test_gamma_matches_double_loop():
    model, par = ex2_model(6), EX2
    z = par.p / (par.p + par.h)
    ybar = [model.distribution(s).inverse_cdf(z) for s in range(1, 7)]
    ref = max(model.distribution(t).cdf(ybar[s - 1])
              for s in range(2, 7) for t in range(s, 7))
    assert excess_probability(model, par) == pytest.approx(ref, abs=1e-15)


def test_fractile_monotone():
    par = TransformedCostParams(4.0, 1.0, 2.0, 0.9)
    assert check_fractile_monotone(iid_demand([0.2, 0.5, 0.3], 5), par).holds
    spec = CompoundPoissonSpec((2.6, 5.5, 1.9, 3.2, 3.7, 0.1, 0.0), 0.32)
    weekly = CompoundPoissonDemand(spec, 7)
    res = check_fractile_monotone(weekly, par)
    assert not res.holds and len(res.fractiles) == 7
    # h = 0 puts every fractile at the support maximum
    par0 = TransformedCostParams(4.0, 0.0, 2.0, 1.0)
    assert check_fractile_monotone(point_mass_demand([1, 2, 2, 5]), par0).holds


def test_iid_continuous_gamma_is_the_critical_fractile():
    par = TransformedCostParams(p=3.0, h=1.0, w=0.0, beta=1.0)
    mc = check_mixed_condition(exponential_demand([4.0] * 5), par)
    assert mc.gamma == pytest.approx(0.75)
    assert mc.threshold == pytest.approx(par.h)
    assert mc.holds


def test_monotone_fractiles_imply_mixed_condition():
    rng = np.random.default_rng(1)
    for _ in range(50):
        T = int(rng.integers(2, 6))
        means = np.sort(rng.uniform(1, 10, T))
        model = exponential_demand(list(means))
        par = TransformedCostParams(float(rng.uniform(0.5, 10)), float(rng.uniform(0, 10)),
                                    float(rng.uniform(0, 10)), float(rng.uniform(0.5, 1)))
        assert check_fractile_monotone(model, par).holds
        assert check_mixed_condition(model, par).holds


def test_point_mass_drop_gives_gamma_one():
    par = TransformedCostParams(p=5.0, h=1.0, w=2.0, beta=0.8)
    model = point_mass_demand([10, 0])
    mc = check_mixed_condition(model, par)
    assert mc.gamma == 1.0
    # the threshold reduces to the cost-condition bound
    assert mc.threshold == pytest.approx((1 - par.beta) / par.beta * par.w)
    assert mc.holds == check_cost_condition(par).holds


def test_threshold_edge_cases():
    assert math.isinf(mixed_threshold(0.0, EX2))
    with pytest.raises(ValidationError):
        mixed_threshold(1.5, EX2)
    assert excess_probability(exponential_demand([3.0]), EX2) == 0.0


def test_reports():
    r1 = guarantee_report(iid_demand([0.2, 0.3, 0.3, 0.2], 6),
                          CostParams(c=1.0, p=5.0, h=0.0, w=0.0, beta=0.9), 5)
    assert r1.verified and r1.our_guarantee == 2.0
    assert r1.chao_guarantee == pytest.approx(2.214, abs=1e-3)
    r2 = guarantee_report(ex2_model(), EX2, 5)
    assert r2.verified and r2.prop5_holds and not r2.prop4_holds
    assert r2.chao_guarantee == pytest.approx(2.3)
    bad = guarantee_report(point_mass_demand([10, 5, 0]),
                           TransformedCostParams(p=5.0, h=1.0, w=0.0, beta=1.0), 3)
    assert not bad.verified and bad.our_guarantee is None
    d = bad.as_dict()
    assert d["guarantee_status"].startswith("unverified")
    assert "unverified" in bad.to_text()


def test_uniform_model_checks():
    m = uniform_demand([0.0, 0.0], [1.0, 2.0])
    par = TransformedCostParams(1.0, 1.0, 0.0, 1.0)
    assert check_fractile_monotone(m, par).fractiles == ((0.5,), (1.0,))
    assert isinstance(m, ContinuousDemand)
    assert excess_probability(m, par) == pytest.approx(stats.uniform(0, 2).cdf(1.0))
