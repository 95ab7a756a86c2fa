"""Experiment configuration: a YAML file validated into dataclasses.

Unknown keys are rejected everywhere, and ``dump(load(text))`` reproduces
the parsed configuration exactly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import yaml

from .demand import (CompoundPoissonSpec, CompoundPoissonDemand,
                     ForecastCompoundPoissonDemand, IndependentDemand,
                     exponential_demand, iid_demand, point_mass_demand,
                     uniform_demand)
from .errors import ConfigurationError
from .inventory import CostParams, TransformedCostParams

DEMAND_KEYS = {
    "iid": {"pmf"},
    "independent": {"pmfs"},
    "point_mass": {"values"},
    "compound_poisson": {"arrival_means", "per_arrival_mean", "truncation_bound"},
    "forecast_compound_poisson": {"arrival_means", "per_arrival_mean",
                                  "truncation_bound", "forecast_horizon"},
    "exponential": {"means"},
    "uniform": {"lows", "highs"},
}
POLICY_KINDS = ("balancing", "truncated", "myopic", "base_stock", "opt", "opt_wof")


@dataclass
class CostConfig:
    kind: str = "transformed"
    p: float = 0.0
    h: float = 0.0
    w: float = 0.0
    beta: float = 1.0
    c: float | None = None


@dataclass
class DemandConfig:
    kind: str
    pmf: list | None = None
    pmfs: list | None = None
    values: list | None = None
    arrival_means: list | None = None
    per_arrival_mean: float | None = None
    truncation_bound: int | None = None
    forecast_horizon: int | None = None
    means: list | None = None
    lows: list | None = None
    highs: list | None = None


@dataclass
class PolicyConfig:
    name: str
    kind: str
    mode: str = "fractional"
    upper: str = "fractile"
    S: object = None


@dataclass
class SimulationConfig:
    n_scenarios: int = 1000
    seed: int = 0
    n_jobs: int = 1


@dataclass
class DPConfig:
    inventory_cap: int | None = None
    count_cap: int | None = None
    demand_cap: int | None = None
    state_limit: int = 5_000_000


@dataclass
class OutputConfig:
    dir: str = "results"


@dataclass
class ExperimentConfig:
    name: str
    K: int
    T: int
    costs: CostConfig
    demand: DemandConfig
    policies: list = field(default_factory=list)
    p_values: list | None = None
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    dp: DPConfig = field(default_factory=DPConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def penalties(self):
        """Shortage penalties to sweep (the configured one if no sweep)."""
        return list(self.p_values) if self.p_values else [self.costs.p]

    def policy(self, name):
        for pc in self.policies:
            if pc.name == name:
                return pc
        raise ConfigurationError(f"no policy named {name!r} in the config")


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigurationError(f"{where}: expected a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    extra = set(data) - names
    if extra:
        raise ConfigurationError(f"{where}: unknown keys {sorted(extra)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigurationError(f"{where}: {exc}") from None


def _check_int(v, where, minimum=0, optional=False):
    if v is None and optional:
        return
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ConfigurationError(f"{where} must be an integer >= {minimum}")


def _validate(cfg: ExperimentConfig):
    _check_int(cfg.K, "K", 2)
    _check_int(cfg.T, "T", 1)
    c = cfg.costs
    if c.kind not in ("transformed", "original"):
        raise ConfigurationError("costs.kind must be 'transformed' or 'original'")
    if c.kind == "original" and c.c is None:
        raise ConfigurationError("original costs need the ordering cost c")
    if c.kind == "transformed" and c.c is not None:
        raise ConfigurationError("transformed costs take no ordering cost c")
    for p in cfg.penalties():
        build_params(cfg, p)

    d = cfg.demand
    if d.kind not in DEMAND_KEYS:
        raise ConfigurationError(f"unknown demand kind {d.kind!r}")
    given = {k for k, v in dataclasses.asdict(d).items() if v is not None and k != "kind"}
    extra = given - DEMAND_KEYS[d.kind]
    if extra:
        raise ConfigurationError(f"demand kind {d.kind!r} does not take {sorted(extra)}")
    build_model(cfg)

    seen = set()
    for pc in cfg.policies:
        if pc.kind not in POLICY_KINDS:
            raise ConfigurationError(f"policy {pc.name!r}: unknown kind {pc.kind!r}")
        if pc.mode not in ("integer", "fractional"):
            raise ConfigurationError(f"policy {pc.name!r}: mode must be integer or fractional")
        if pc.upper not in ("fractile", "infinite"):
            raise ConfigurationError(f"policy {pc.name!r}: upper must be fractile or infinite")
        if (pc.kind == "base_stock") != (pc.S is not None):
            raise ConfigurationError(f"policy {pc.name!r}: S is required for "
                                     "base_stock and only allowed there")
        if pc.name in seen:
            raise ConfigurationError(f"duplicate policy name {pc.name!r}")
        seen.add(pc.name)
    s = cfg.simulation
    _check_int(s.n_scenarios, "simulation.n_scenarios", 1)
    _check_int(s.seed, "simulation.seed", 0)
    _check_int(s.n_jobs, "simulation.n_jobs", 1)
    for k in ("inventory_cap", "count_cap", "demand_cap"):
        _check_int(getattr(cfg.dp, k), f"dp.{k}", 0, optional=True)
    _check_int(cfg.dp.state_limit, "dp.state_limit", 1)


def from_dict(data) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a mapping")
    data = dict(data)
    for key in ("name", "K", "T", "costs", "demand"):
        if key not in data:
            raise ConfigurationError(f"missing required key {key!r}")
    data["costs"] = _build(CostConfig, data["costs"], "costs")
    data["demand"] = _build(DemandConfig, data["demand"], "demand")
    pols = data.get("policies") or []
    if not isinstance(pols, list):
        raise ConfigurationError("policies must be a list")
    data["policies"] = [_build(PolicyConfig, p, f"policies[{i}]") for i, p in enumerate(pols)]
    if "simulation" in data:
        data["simulation"] = _build(SimulationConfig, data["simulation"], "simulation")
    if "dp" in data:
        data["dp"] = _build(DPConfig, data["dp"], "dp")
    if "output" in data:
        data["output"] = _build(OutputConfig, data["output"], "output")
    cfg = _build(ExperimentConfig, data, "config")
    _validate(cfg)
    return cfg


def to_dict(cfg: ExperimentConfig):
    return dataclasses.asdict(cfg)


def loads(text) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"invalid YAML: {exc}") from None
    return from_dict(data)


def dumps(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)


def load(path) -> ExperimentConfig:
    with open(path) as fh:
        return loads(fh.read())


def build_params(cfg: ExperimentConfig, p=None):
    """Cost parameters, optionally with the shortage penalty replaced."""
    c = cfg.costs
    p = c.p if p is None else p
    try:
        if c.kind == "original":
            return CostParams(c=c.c, p=p, h=c.h, w=c.w, beta=c.beta)
        return TransformedCostParams(p=p, h=c.h, w=c.w, beta=c.beta)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None


def build_model(cfg: ExperimentConfig):
    d, T = cfg.demand, cfg.T

    def need(*keys):
        for k in keys:
            if getattr(d, k) is None:
                raise ConfigurationError(f"demand kind {d.kind!r} needs {k!r}")

    try:
        if d.kind == "iid":
            need("pmf")
            return iid_demand(d.pmf, T)
        if d.kind == "independent":
            need("pmfs")
            if len(d.pmfs) != T:
                raise ConfigurationError("demand.pmfs needs one pmf per period")
            return IndependentDemand(d.pmfs)
        if d.kind == "point_mass":
            need("values")
            if len(d.values) != T:
                raise ConfigurationError("demand.values needs one value per period")
            return point_mass_demand(d.values)
        if d.kind in ("compound_poisson", "forecast_compound_poisson"):
            need("arrival_means", "per_arrival_mean")
            spec = CompoundPoissonSpec(tuple(d.arrival_means), d.per_arrival_mean,
                                       d.truncation_bound)
            if d.kind == "compound_poisson":
                return CompoundPoissonDemand(spec, T)
            return ForecastCompoundPoissonDemand(spec, T, d.forecast_horizon or 3)
        if d.kind == "exponential":
            need("means")
            return exponential_demand([d.means[i % len(d.means)] for i in range(T)])
        if d.kind == "uniform":
            need("lows", "highs")
            n = len(d.lows)
            return uniform_demand([d.lows[i % n] for i in range(T)],
                                  [d.highs[i % n] for i in range(T)])
    except ConfigurationError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigurationError(f"demand: {exc}") from None
    raise ConfigurationError(f"unknown demand kind {d.kind!r}")


def dp_instance(cfg: ExperimentConfig, params, model=None, wof=False):
    from .dp import DPInstance
    model = build_model(cfg) if model is None else model
    return DPInstance(K=cfg.K, params=params, model=model,
                      inventory_cap=cfg.dp.inventory_cap, count_cap=cfg.dp.count_cap,
                      demand_cap=cfg.dp.demand_cap, state_limit=cfg.dp.state_limit,
                      wof=wof)


def build_policy(pc: PolicyConfig, cfg: ExperimentConfig, model, params, force=False):
    from . import dp, policies
    from .inventory import transform_costs
    tp = transform_costs(params) if isinstance(params, CostParams) else params
    if pc.kind == "balancing":
        return policies.DualBalancingPolicy(model, tp, mode=pc.mode, name=pc.name)
    if pc.kind == "myopic":
        return policies.MyopicPolicy(model, tp, mode=pc.mode, name=pc.name)
    if pc.kind == "truncated":
        return policies.TruncatedBalancingPolicy(model, tp, upper_mode=pc.upper,
                                                 mode=pc.mode, name=pc.name)
    if pc.kind == "base_stock":
        return policies.BaseStockPolicy(pc.S, name=pc.name)
    if pc.kind in ("opt", "opt_wof"):
        inst = dp_instance(cfg, tp, model, wof=pc.kind == "opt_wof")
        return dp.TablePolicy(dp.solve_opt(inst, force=force), name=pc.name)
    raise ConfigurationError(f"unknown policy kind {pc.kind!r}")
