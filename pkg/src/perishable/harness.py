"""Monte Carlo policy evaluation with common random numbers.

Scenario ``i`` of a run with master seed ``s`` draws its demand path from
``numpy.random.default_rng((s, i))``, so every policy sees the same
scenarios and results do not depend on how scenarios are split over
threads.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, ValidationError
from .inventory import (CostParams, SamplePath, empty_inventory, lemma1_residual,
                        period_cost_transformed, total_cost_original,
                        transform_costs)

LEMMA1_TOL = 1e-9


@dataclass(frozen=True)
class EvaluationResult:
    policy: str
    mean_cost: float
    se: float
    n_scenarios: int
    seed: int
    per_period: tuple
    mean_original: float | None = None
    se_original: float | None = None
    costs: np.ndarray = field(default=None, repr=False, compare=False)

    def ci95(self):
        half = 1.959963984540054 * self.se
        return self.mean_cost - half, self.mean_cost + half


def scenario_seed(seed, i):
    return (int(seed), int(i))


def _split(params):
    if isinstance(params, CostParams):
        return transform_costs(params), params
    return params, None


def simulate_path(policy, model, K, seed, i=None):
    """Run ``policy`` on one scenario from zero inventory.

    ``seed`` is the master seed; with ``i`` given, the scenario seed is
    ``(seed, i)``. Returns the :class:`SamplePath`.
    """
    key = seed if i is None else scenario_seed(seed, i)
    demands, infos = model.sample_path(key)
    path = SamplePath(empty_inventory(K))
    for t, (d, info) in enumerate(zip(demands, infos), start=1):
        q = policy.order(t, path.terminal, info)
        if q < 0:
            raise ConsistencyError(f"policy returned a negative order at t={t}")
        path.append(q, d)
    return path


def _run_one(policy, model, K, tparams, oparams, seed, i):
    path = simulate_path(policy, model, K, seed, i)
    per = np.array([period_cost_transformed(r.x, r.q, r.d, tparams, r.t)
                    for r in path.records])
    orig = None
    if oparams is not None:
        orig = total_cost_original(path, oparams)
        resid = lemma1_residual(path, oparams, tparams)
        if abs(resid) > LEMMA1_TOL * (1 + abs(orig)):
            raise ConsistencyError(
                f"original/transformed accounting mismatch {resid!r} in scenario {i}")
    return per, orig


def _mean_se(values):
    n = len(values)
    mean = math.fsum(values) / n
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se


def evaluate(policy, model, params, K, n_scenarios, seed=0, n_jobs=1, name=None):
    """Average discounted cost of ``policy`` over ``n_scenarios`` CRN paths.

    ``params`` may be original costs (then the original-cost mean is also
    reported and the transformed/original accounting identity is asserted
    on every path) or transformed costs.
    """
    if n_scenarios < 1:
        raise ValidationError("n_scenarios must be >= 1")
    tparams, oparams = _split(params)

    def work(i):
        return _run_one(policy, model, K, tparams, oparams, seed, i)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(work, range(n_scenarios)))
    else:
        results = [work(i) for i in range(n_scenarios)]

    per = np.vstack([r[0] for r in results])
    totals = [math.fsum(row) for row in per]
    mean, se = _mean_se(totals)
    per_period = tuple(math.fsum(col) / n_scenarios for col in per.T)
    mo = so = None
    if oparams is not None:
        mo, so = _mean_se([r[1] for r in results])
    return EvaluationResult(policy=name or getattr(policy, "name", "policy"),
                            mean_cost=mean, se=se, n_scenarios=n_scenarios,
                            seed=seed, per_period=per_period, mean_original=mo,
                            se_original=so, costs=np.asarray(totals))


def error_metric(cost_pi, cost_opt):
    """Percentage excess of ``cost_pi`` over the optimal cost."""
    if cost_opt <= 0:
        raise ValidationError("reference cost must be positive")
    return (cost_pi - cost_opt) / cost_opt * 100.0


def impr_metric(cost_wof, cost_pi):
    """Percentage saving of ``cost_pi`` relative to the forecast-free optimum."""
    if cost_wof <= 0:
        raise ValidationError("reference cost must be positive")
    return (cost_wof - cost_pi) / cost_wof * 100.0


def paired_se(a: EvaluationResult, b: EvaluationResult):
    """Standard error of ``mean(a) - mean(b)`` using the CRN pairing."""
    if a.costs is None or b.costs is None or a.costs.size != b.costs.size:
        raise ValidationError("paired comparison needs per-scenario costs on the "
                              "same scenarios")
    diff = a.costs - b.costs
    return float(np.std(diff, ddof=1) / math.sqrt(diff.size)) if diff.size > 1 else 0.0


RESULT_COLUMNS = ("policy", "p", "mean_cost", "se", "error_pct", "impr_pct")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(round(v, 10))
    return str(v)


def write_results_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in RESULT_COLUMNS])


def write_results_json(rows, path):
    with open(path, "w") as fh:
        json.dump([{c: row.get(c) for c in RESULT_COLUMNS} for row in rows], fh,
                  indent=2, sort_keys=False)
        fh.write("\n")


def run_platelet_experiment(config, policies=None, n_scenarios=None, seed=None,
                            n_jobs=None, progress=None):
    """Evaluate the configured policies for every shortage penalty.

    Returns a list of row dicts with the columns of :data:`RESULT_COLUMNS`
    plus ``result`` (the :class:`EvaluationResult`). Errors are relative to
    the ``OPT`` row and improvements relative to ``OPT_wof`` when those
    policies are part of the run.
    """
    from .config import build_model, build_params, build_policy

    names = policies or [pc.name for pc in config.policies]
    n = n_scenarios or config.simulation.n_scenarios
    sd = config.simulation.seed if seed is None else seed
    jobs = n_jobs or config.simulation.n_jobs
    model = build_model(config)
    rows = []
    for p in config.penalties():
        params = build_params(config, p)
        evals = {}
        for pc in config.policies:
            if pc.name not in names:
                continue
            pol = build_policy(pc, config, model, params)
            if progress:
                progress(f"p={p:g} policy={pc.name}")
            evals[pc.name] = evaluate(pol, model, params, config.K, n, sd, jobs,
                                      name=pc.name)
        opt = evals.get("OPT")
        wof = evals.get("OPT_wof")
        for nm, res in evals.items():
            rows.append({
                "policy": nm, "p": p, "mean_cost": res.mean_cost, "se": res.se,
                "error_pct": error_metric(res.mean_cost, opt.mean_cost) if opt else None,
                "impr_pct": impr_metric(wof.mean_cost, res.mean_cost) if wof else None,
                "result": res,
            })
    return rows
