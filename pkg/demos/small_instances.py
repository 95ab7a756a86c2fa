"""
Balancing policies against the exact optimum
============================================

On instances small enough for exhaustive dynamic programming we can
compare the balancing policy (B), its truncated variant (TB) and the best
base-stock level with the true optimal expected cost.
"""

import numpy as np

from perishable import (BaseStockPolicy, DualBalancingPolicy, IndependentDemand,
                        TransformedCostParams, TruncatedBalancingPolicy,
                        brute_force_policy_eval, exact_base_stock, solve_opt)
from perishable.dp import DPInstance

rng = np.random.default_rng(3)
print(f"{'K':>2} {'T':>2} {'OPT':>8} {'B/OPT':>7} {'TB/OPT':>7} {'S*/OPT':>7}")
for _ in range(8):
    K = int(rng.integers(2, 4))
    T = K + int(rng.integers(1, 3))
    # random pmfs on {0, 1, 2, 3}
    model = IndependentDemand([rng.dirichlet(np.ones(4)) for _ in range(T)])
    par = TransformedCostParams(p=float(rng.integers(2, 20)), h=float(rng.integers(0, 3)),
                                w=float(rng.integers(1, 10)), beta=0.95)
    inst = DPInstance(K=K, params=par, model=model)
    opt = solve_opt(inst).expected_cost()
    b = brute_force_policy_eval(DualBalancingPolicy(model, par), inst)
    tb = brute_force_policy_eval(TruncatedBalancingPolicy(model, par), inst)
    _, bs = exact_base_stock(inst)
    print(f"{K:>2} {T:>2} {opt:8.3f} {b / opt:7.3f} {tb / opt:7.3f} {bs / opt:7.3f}")

# Rounding the balancing point up to an integer can be costly. Here the
# expected shortage falls by only 0.02 per extra unit while the outdating
# cost of that unit is almost 10, so the integer policy overshoots.
model = IndependentDemand([[0.0, 0.98, 0.02], [1.0]])
par = TransformedCostParams(p=1.0, h=0.0, w=10.0, beta=1.0)
inst = DPInstance(K=2, params=par, model=model)
print()
print("optimal       ", round(solve_opt(inst).expected_cost(), 4))
for mode in ("fractional", "integer"):
    pol = DualBalancingPolicy(model, par, mode=mode)
    print(f"B {mode:<12}", round(brute_force_policy_eval(pol, inst), 4))
print("base stock 1  ", round(brute_force_policy_eval(BaseStockPolicy(1), inst), 4))
