import itertools

import numpy as np
import pytest

from conftest import random_pmfs
from oracles import simulate_cost
from perishable import (BaseStockPolicy, CompoundPoissonSpec, DualBalancingPolicy,
                        ForecastCompoundPoissonDemand, IndependentDemand, InfoSet,
                        TransformedCostParams, bellman_residual, brute_force_policy_eval,
                        cost_to_go_differences, evaluate, iid_demand, point_mass_demand,
                        solve_opt, solve_opt_wof)
from perishable.dp import (DPInstance, TablePolicy, brute_force_node_sum, exact_base_stock,
                           reachable_states)
from perishable.errors import CapabilityError, ResourceError
from perishable.marginal import marginal_triple

SPEC = CompoundPoissonSpec((2.6, 5.5, 1.9, 3.2, 3.7, 0.1, 0.0), 0.32)


def test_single_period_is_newsvendor():
    pmf = [0.1, 0.2, 0.3, 0.25, 0.15]
    par = TransformedCostParams(p=3.0, h=1.0, w=2.0, beta=1.0)
    tb = solve_opt(DPInstance(K=3, params=par, model=iid_demand(pmf, 1)))
    assert tb.order(1, (0, 0)) == 3
    assert tb.order(1, (1, 1)) == 1


def test_zero_demand():
    par = TransformedCostParams(p=3.0, h=1.0, w=2.0, beta=0.9)
    m = point_mass_demand([0, 0, 0])
    for solver in (solve_opt, solve_opt_wof):
        tb = solver(DPInstance(K=2, params=par, model=m))
        assert tb.expected_cost() == 0
        assert all(np.all(o == 0) for o in tb.orders)
    assert brute_force_policy_eval(BaseStockPolicy(0), DPInstance(K=2, params=par, model=m)) == 0


def test_value_matches_enumeration_of_decision_rules():
    pmfs = [[0.5, 0.5], [0.5, 0.5]]
    par = TransformedCostParams(p=2.0, h=1.0, w=1.0, beta=1.0)
    tb = solve_opt(DPInstance(K=2, params=par, model=IndependentDemand(pmfs)))
    best = np.inf
    # a rule is q_1 and one q_2 per realized d_1
    for q1, q2a, q2b in itertools.product(range(4), repeat=3):
        rule = {(): q1, (0,): q2a, (1,): q2b}
        best = min(best, simulate_cost(lambda t, x, h: rule[tuple(h)], pmfs, 2, 2.0, 1.0,
                                       1.0, 1.0))
    assert tb.expected_cost() == pytest.approx(best, abs=1e-12)
    assert best == pytest.approx(1.25)


def test_bellman_residual_and_optimality_over_policies():
    rng = np.random.default_rng(2)
    for _ in range(10):
        K, T = int(rng.integers(2, 4)), int(rng.integers(1, 5))
        m = IndependentDemand(random_pmfs(rng, T))
        par = TransformedCostParams(float(rng.integers(1, 10)), float(rng.integers(0, 3)),
                                    float(rng.integers(0, 10)), float(rng.choice([1, 0.8])))
        inst = DPInstance(K=K, params=par, model=m)
        tb = solve_opt(inst)
        assert bellman_residual(tb) <= 1e-12
        opt = tb.expected_cost()
        assert brute_force_policy_eval(TablePolicy(tb), inst) == pytest.approx(opt, abs=1e-12)
        for pol in (DualBalancingPolicy(m, par), BaseStockPolicy(int(rng.integers(0, 5)))):
            assert opt <= brute_force_policy_eval(pol, inst) + 1e-12


def test_brute_force_matches_independent_oracle():
    rng = np.random.default_rng(9)
    for _ in range(20):
        K, T = int(rng.integers(2, 4)), int(rng.integers(1, 5))
        pmfs = random_pmfs(rng, T)
        par = TransformedCostParams(5.0, 1.0, 2.0, 0.9)
        S = int(rng.integers(0, 5))
        got = brute_force_policy_eval(BaseStockPolicy(S), DPInstance(K=K, params=par,
                                                                    model=IndependentDemand(pmfs)))
        ref = simulate_cost(lambda t, x, h: max(S - sum(x), 0), pmfs, K, 5.0, 1.0, 2.0, 0.9)
        assert got == pytest.approx(ref, abs=1e-12)


def test_marginal_costs_sum_to_policy_cost():
    rng = np.random.default_rng(10)
    for _ in range(20):
        K, T = int(rng.integers(2, 4)), int(rng.integers(1, 5))
        m = IndependentDemand(random_pmfs(rng, T))
        par = TransformedCostParams(float(rng.integers(1, 10)), float(rng.integers(0, 3)),
                                    float(rng.integers(0, 10)), float(rng.choice([1, 0.8])))
        inst = DPInstance(K=K, params=par, model=m)
        for pol in (DualBalancingPolicy(m, par), BaseStockPolicy(int(rng.integers(0, 5)))):
            total = brute_force_node_sum(
                pol, inst, lambda t, x, info, q: marginal_triple(x, t, info, q, par, m).total)
            assert total == pytest.approx(brute_force_policy_eval(pol, inst), abs=1e-9)


def test_brute_force_agrees_with_monte_carlo():
    m = IndependentDemand([[0.3, 0.4, 0.3], [0.2, 0.5, 0.3]])
    par = TransformedCostParams(4.0, 1.0, 3.0, 1.0)
    pol = DualBalancingPolicy(m, par)
    exact = brute_force_policy_eval(pol, DPInstance(K=2, params=par, model=m))
    est = evaluate(pol, m, par, K=2, n_scenarios=100_000, seed=3)
    assert abs(est.mean_cost - exact) <= 4 * est.se


def test_cost_to_go_differences():
    m = iid_demand([0.3, 0.4, 0.3], 3)
    par = TransformedCostParams(5.0, 0.0, 4.0, 0.9)
    tb = solve_opt(DPInstance(K=3, params=par, model=m))
    assert cost_to_go_differences(tb, 4, (0, 0)) == [0.0, 0.0]
    c = cost_to_go_differences(tb, 2, (0, 0))
    assert len(c) == 2 and all(np.isfinite(c))
    with pytest.raises(IndexError):
        cost_to_go_differences(tb, 2, (2, 2))


def test_forecast_information_cannot_hurt():
    m = ForecastCompoundPoissonDemand(SPEC, 5, 3)
    par = TransformedCostParams(1000.0, 0.0, 500.0, 1.0)
    inst = DPInstance(K=3, params=par, model=m, count_cap=3, demand_cap=6)
    full = solve_opt(inst)
    wof = solve_opt_wof(inst)
    assert wof.expected_cost() >= full.expected_cost() - 1e-9
    assert wof.signals[0] == [()]


def test_forecast_free_model_wof_is_identical():
    m = iid_demand([0.3, 0.4, 0.3], 3)
    par = TransformedCostParams(5.0, 0.0, 4.0, 0.9)
    a = solve_opt(DPInstance(K=3, params=par, model=m))
    b = solve_opt_wof(DPInstance(K=3, params=par, model=m))
    assert all(np.array_equal(u, v) for u, v in zip(a.values, b.values))


def test_resource_and_capability_errors():
    m = iid_demand([0.5, 0.5], 2)
    par = TransformedCostParams(1.0, 0.0, 1.0)
    with pytest.raises(ResourceError) as exc:
        solve_opt(DPInstance(K=4, params=par, model=m, inventory_cap=30, state_limit=1000))
    assert exc.value.size == 31 ** 3
    with pytest.raises(ResourceError):
        brute_force_policy_eval(BaseStockPolicy(1), DPInstance(K=2, params=par, model=m),
                                path_limit=3)
    fm = ForecastCompoundPoissonDemand(SPEC, 3, 3)
    with pytest.raises(CapabilityError):
        brute_force_policy_eval(BaseStockPolicy(1), DPInstance(K=2, params=par, model=fm,
                                                               count_cap=2, demand_cap=4))


def test_value_table_csv(tmp_path):
    tb = solve_opt(DPInstance(K=2, params=TransformedCostParams(2.0, 1.0, 1.0),
                              model=iid_demand([0.5, 0.5], 2)))
    path = tmp_path / "v.csv"
    tb.to_csv(path)
    rows = path.read_text().splitlines()
    assert rows[0] == "t,signal,inventory,value,order" and len(rows) == 1 + 2 * 2


def test_exact_base_stock_and_reachable_states():
    m = iid_demand([0.2, 0.5, 0.3], 3)
    par = TransformedCostParams(6.0, 0.5, 2.0, 1.0)
    inst = DPInstance(K=2, params=par, model=m)
    S, cost = exact_base_stock(inst)
    assert cost == min(brute_force_policy_eval(BaseStockPolicy(s), inst) for s in range(5))
    nodes = reachable_states(BaseStockPolicy(S), inst)
    assert nodes[0][0] == 1 and nodes[0][1] == (0,)
    assert len(nodes) == 1 + 3 + 9


def test_integer_rounding_can_break_the_factor_two_bound():
    # P(q) falls by 0.02 per unit beyond q = 1 while W rises by 9.8, so the
    # smallest integer crossing jumps to q = 2 and pays the outdating cost
    m = IndependentDemand([[0.0, 0.98, 0.02], [1.0]])
    par = TransformedCostParams(p=1.0, h=0.0, w=10.0, beta=1.0)
    inst = DPInstance(K=2, params=par, model=m)
    opt = solve_opt(inst).expected_cost()
    integer = brute_force_policy_eval(DualBalancingPolicy(m, par, mode="integer"), inst)
    fractional = brute_force_policy_eval(DualBalancingPolicy(m, par), inst)
    assert opt == pytest.approx(0.02)
    assert integer == pytest.approx(9.8)
    assert fractional <= 2 * opt
    q = DualBalancingPolicy(m, par).order(1, (0,), InfoSet(1))
    assert q == pytest.approx(1 + 0.02 / 9.82)
