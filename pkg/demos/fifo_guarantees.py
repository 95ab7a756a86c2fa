"""
When is the factor-two guarantee certified?
===========================================

The balancing policy is within a factor of two of optimal as long as
issuing oldest-first is optimal. Three sufficient checks are available.
The earlier proportional analysis gives a weaker factor that grows with
the shelf life, and this script compares the two on a pair of settings.
"""

from perishable import (CostParams, TransformedCostParams, chao_guarantee,
                        exponential_demand, guarantee_report, iid_demand)

# Constant costs: unit ordering cost, no holding or outdating charge in
# original terms. Discounting alone pushes the transformed outdating cost
# high enough for the cost condition to hold.
model = iid_demand([0.2, 0.3, 0.3, 0.2], 6)
for beta in (0.9, 0.95, 0.99):
    par = CostParams(c=1.0, p=5.0, h=0.0, w=0.0, beta=beta)
    rep = guarantee_report(model, par, K=5)
    print(f"beta={beta}: ours {rep.our_guarantee}, earlier {chao_guarantee(5, par):.3f}")

# Alternating exponential demand with a positive holding cost. The cost
# condition fails, but the demand is spread out enough that the mixed
# condition still certifies oldest-first issuing.
means = [5.0 if t % 2 == 0 else 6.0 for t in range(10)]
par = TransformedCostParams(p=5.0, h=1.0, w=5.0, beta=1.0)
rep = guarantee_report(exponential_demand(means), par, K=5)
print()
print(rep.to_text())
