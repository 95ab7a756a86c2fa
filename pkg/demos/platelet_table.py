"""
Platelet ordering at a hospital blood bank
==========================================

Platelets keep for three days. Daily demand is driven by the number of
surgeries, which is known three days ahead. We compare the balancing
policies with two dynamic programming benchmarks: one that sees the
surgery forecast (OPT) and one that does not (OPT_wof).

The full run uses 10000 scenarios per policy and takes several minutes;
pass a smaller count on the command line for a quick look.
"""

import sys
from pathlib import Path

from perishable import config, run_platelet_experiment

n = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
cfg = config.load(Path(__file__).resolve().parents[1] / "configs" / "platelet.yaml")

# every policy sees the same demand paths, so differences are paired
rows = run_platelet_experiment(cfg, n_scenarios=n, seed=0,
                               progress=lambda msg: print("..", msg, file=sys.stderr))

print(f"{'p':>6} {'policy':<8} {'cost':>9} {'se':>6} {'error %':>8} {'impr %':>7}")
for r in rows:
    err = "" if r["error_pct"] is None else f"{r['error_pct']:.2f}"
    imp = "" if r["impr_pct"] is None else f"{r['impr_pct']:.2f}"
    print(f"{r['p']:6g} {r['policy']:<8} {r['mean_cost']:9.1f} {r['se']:6.1f} {err:>8} {imp:>7}")

# The forecast-aware policies should sit below OPT_wof, and the gap
# between B and TB widens as shortages become more expensive.
