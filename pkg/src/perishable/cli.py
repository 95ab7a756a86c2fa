"""Command-line entry point.

Exit codes: 0 success, 1 file errors, 2 invalid input, 3 resource limits,
4 internal consistency failures.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from . import config as cfgmod
from .demand import InfoSet
from .errors import (CapabilityError, ConfigurationError, ConsistencyError,
                     ResourceError, SearchBoundError, ValidationError)
from .fifo import guarantee_report
from .inventory import CostParams, inventory_vector, transform_costs

EXIT_OK, EXIT_IO, EXIT_VALIDATION, EXIT_RESOURCE, EXIT_CONSISTENCY = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


def _ints(text, what):
    if text is None or text == "":
        return ()
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated list of integers") from None


def _nums(text, what):
    try:
        return tuple(float(v) if "." in v else int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated list of numbers") from None


def _transformed(params):
    return transform_costs(params) if isinstance(params, CostParams) else params


def _report(cfg, model, params):
    return guarantee_report(model, _transformed(params), cfg.K)


def _warn_upper(cfg, report, policies):
    if report.verified:
        return
    if any(pc.kind == "truncated" and pc.upper == "fractile" for pc in policies):
        print("warning: no FIFO-optimality condition verifies for this config; the "
              "fractile upper bound of TB relies on it. Set 'upper: infinite' to "
              "drop the bound.", file=sys.stderr)


def cmd_decide(args, cfg):
    from .config import build_policy
    model = cfgmod.build_model(cfg)
    params = cfgmod.build_params(cfg, args.p)
    names = [args.policy] if args.policy else [pc.name for pc in cfg.policies
                                              if pc.kind in ("balancing", "truncated",
                                                             "myopic", "base_stock")]
    if not names:
        raise UsageError("the config lists no policy that decide can run")
    t = args.t
    if not 1 <= t <= cfg.T:
        raise UsageError(f"--t must lie in 1..{cfg.T}")
    try:
        x = inventory_vector(_nums(args.x, "--x") if args.x else (0,) * (cfg.K - 1), cfg.K)
    except ValidationError as exc:
        raise UsageError(str(exc)) from None
    realized = (_nums(args.realized, "--realized") if args.realized else ()) or (0,) * (t - 1)
    try:
        info = InfoSet(t, realized, _ints(args.signals, "--signals"))
    except ValidationError as exc:
        raise UsageError(str(exc)) from None
    report = _report(cfg, model, params)
    out = {"t": t, "x": list(x), "guarantee": report.as_dict(), "decisions": []}
    for name in names:
        pc = cfg.policy(name)
        pol = build_policy(pc, cfg, model, params)
        dec = pol.decide(t, x, info)
        row = {"policy": name, "q": dec.q}
        if dec.triple is not None:
            row.update(P=dec.triple.P, H=dec.triple.H, W=dec.triple.W)
        if dec.lower is not None:
            row["lower"] = dec.lower
        if dec.upper is not None:
            row["upper"] = None if math.isinf(dec.upper) else dec.upper
        if dec.balancing is not None:
            row["balancing"] = dec.balancing
        out["decisions"].append(row)
    if args.json:
        print(json.dumps(out, indent=2))
        return EXIT_OK
    print(f"period {t}, inventory {x}")
    for row in out["decisions"]:
        extra = "  ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                          for k, v in row.items() if k not in ("policy", "q"))
        print(f"{row['policy']:>8}: q={row['q']:.6g}  {extra}")
    g = report.as_dict()
    print(f"guarantee: {g['our_guarantee'] if report.verified else g['guarantee_status']}"
          f" (earlier analysis: {report.chao_guarantee:.6g})")
    return EXIT_OK


def cmd_simulate(args, cfg):
    from .harness import run_platelet_experiment, write_results_csv, write_results_json
    if args.seed is not None:
        cfg.simulation.seed = args.seed
    if args.scenarios is not None:
        cfg.simulation.n_scenarios = args.scenarios
    if args.jobs is not None:
        cfg.simulation.n_jobs = args.jobs
    names = None
    if args.policies:
        names = [n.strip() for n in args.policies.split(",") if n.strip()]
        for n in names:
            cfg.policy(n)
    model = cfgmod.build_model(cfg)
    chosen = [pc for pc in cfg.policies if names is None or pc.name in names]
    _warn_upper(cfg, _report(cfg, model, cfgmod.build_params(cfg)), chosen)
    progress = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None
    rows = run_platelet_experiment(cfg, policies=names, progress=progress)
    out = args.out or cfg.output.dir
    os.makedirs(out, exist_ok=True)
    csv_path = os.path.join(out, "results.csv")
    json_path = os.path.join(out, "results.json")
    write_results_csv(rows, csv_path)
    write_results_json(rows, json_path)
    for row in rows:
        err = "" if row["error_pct"] is None else f"  error={row['error_pct']:.2f}%"
        imp = "" if row["impr_pct"] is None else f"  impr={row['impr_pct']:.2f}%"
        print(f"p={row['p']:g} {row['policy']:>8}: {row['mean_cost']:.2f} "
              f"(se {row['se']:.2f}){err}{imp}")
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def cmd_check_fifo(args, cfg):
    model = cfgmod.build_model(cfg)
    report = _report(cfg, model, cfgmod.build_params(cfg, args.p))
    print(report.to_text())
    print(json.dumps(report.as_dict(), indent=2))
    return EXIT_OK


def cmd_solve_dp(args, cfg):
    from .dp import solve_opt
    params = _transformed(cfgmod.build_params(cfg, args.p))
    inst = cfgmod.dp_instance(cfg, params, wof=args.wof)
    n = inst.size()
    print(f"state space: {n} states per period (inventory cap {inst.inventory_cap}, "
          f"limit {inst.state_limit})")
    inst.check_size(force=args.force)
    table = solve_opt(inst, force=args.force)
    print(f"expected optimal cost from empty stock: {table.expected_cost():.10g}")
    empty = (0,) * (cfg.K - 1)
    for z in table.signals[0]:
        label = f" signal {z}" if z else ""
        print(f"t=1{label}: order {table.order(1, empty, z)}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "value_table_wof.csv" if args.wof else "value_table.csv")
        table.to_csv(path)
        print(f"wrote {path}")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="perishable",
                                 description="Perishable inventory policies and benchmarks.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="YAML experiment file")
        return p

    d = common(sub.add_parser("decide", help="one-shot ordering decision"))
    d.add_argument("--t", type=int, default=1, help="period (1-based)")
    d.add_argument("--x", help="inventory by age 1..K-1, comma separated")
    d.add_argument("--realized", help="past demands d_1..d_{t-1}")
    d.add_argument("--signals", help="surgery counts known so far (forecast model)")
    d.add_argument("--policy", help="policy name from the config")
    d.add_argument("--p", type=float, help="override the shortage penalty")
    d.add_argument("--json", action="store_true")

    s = common(sub.add_parser("simulate", help="Monte Carlo evaluation of policies"))
    s.add_argument("--seed", type=int)
    s.add_argument("--scenarios", type=int)
    s.add_argument("--out", help="output directory")
    s.add_argument("--policies", help="comma-separated policy names")
    s.add_argument("--jobs", type=int, help="worker threads")
    s.add_argument("--verbose", action="store_true")

    c = common(sub.add_parser("check-fifo", help="FIFO-optimality conditions"))
    c.add_argument("--p", type=float, help="override the shortage penalty")

    v = common(sub.add_parser("solve-dp", help="exact dynamic program"))
    v.add_argument("--wof", action="store_true", help="ignore forecast signals")
    v.add_argument("--force", action="store_true", help="solve above the state limit")
    v.add_argument("--out", help="directory for the value-table CSV")
    v.add_argument("--p", type=float, help="override the shortage penalty")
    return ap


COMMANDS = {"decide": cmd_decide, "simulate": cmd_simulate,
            "check-fifo": cmd_check_fifo, "solve-dp": cmd_solve_dp}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = cfgmod.load(args.config)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ConfigurationError, ValidationError, CapabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ResourceError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ConsistencyError, SearchBoundError) as exc:
        print(f"consistency failure: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except OSError as exc:
        print(f"file error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
