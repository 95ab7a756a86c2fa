"""Exact finite-horizon dynamic programming and brute-force oracles.

The state at period ``t`` is the inventory vector (ages ``1..K-1``) plus,
for forecast models, the signal vector ``z`` of known surgery counts.
Values are stored in period-``t`` money, i.e.

    V_t(x, z) = min_q E[ cost_t(x, q, D_t) + beta * V_{t+1}(X_{t+1}, Z_{t+1}) ],

so ``V_1`` at the start state is the expected discounted total cost.

Orders are restricted to ``q <= dmax_t - sum(x)`` where ``dmax_t`` is the
largest demand value of period ``t``. This is without loss of optimality
for transformed costs: units beyond ``dmax_t`` are certain to be carried
over, and ordering them one period later costs nothing more and leaves a
fresher stock. With that restriction every age level stays at most
``max_t dmax_t``, which is the default inventory cap.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .demand import DiscreteDist, InfoSet
from .errors import CapabilityError, ResourceError, ValidationError
from .inventory import (CostParams, period_cost_transformed, transform_costs,
                        transition)
from .policies import OrderingPolicy, PolicyDecision

DEFAULT_STATE_LIMIT = 5_000_000
DEFAULT_PATH_LIMIT = 2_000_000
TIE_RTOL = 1e-12


def _cap_dist(dist, demand_cap):
    if demand_cap is None or dist.support_max <= demand_cap:
        return dist
    p = np.array(dist.pmf[: demand_cap + 1])
    p[demand_cap] += dist.pmf[demand_cap + 1:].sum()
    return DiscreteDist(p)


@dataclass
class DPInstance:
    """A problem small enough for backward induction.

    ``inventory_cap`` bounds every age level (default: the largest demand
    value). ``count_cap`` and ``demand_cap`` shrink the forecast signal space
    and the demand support; both fold the removed tail onto the cap, so the
    result is exact for the truncated problem only.
    """

    K: int
    params: object
    model: object
    inventory_cap: int | None = None
    count_cap: int | None = None
    demand_cap: int | None = None
    state_limit: int = DEFAULT_STATE_LIMIT
    wof: bool = False

    def __post_init__(self):
        if self.K < 2:
            raise ValidationError("lifetime K must be at least 2")
        if isinstance(self.params, CostParams):
            self.params = transform_costs(self.params)
        if self.wof:
            self.model = self.model.marginal()
        if not self.model.integer:
            raise CapabilityError("dynamic programming needs integer demand")
        if self.inventory_cap is None:
            self.inventory_cap = self.max_demand()

    @property
    def T(self):
        return self.model.horizon

    def signal_states(self, t):
        return self.model.dp_signal_states(t, self.count_cap)

    def distribution(self, t, z):
        return _cap_dist(self.model.dp_distribution(t, z), self.demand_cap)

    def max_demand(self):
        top = 0
        for t in range(1, self.T + 1):
            for z in self.signal_states(t):
                top = max(top, self.distribution(t, z).support_max)
        return top

    def inventory_states(self):
        M = self.inventory_cap
        return list(itertools.product(range(M + 1), repeat=self.K - 1))

    def size(self):
        """Largest number of (inventory, signal) states in any period."""
        n_inv = (self.inventory_cap + 1) ** (self.K - 1)
        return n_inv * max(len(self.signal_states(t)) for t in range(1, self.T + 1))

    def check_size(self, force=False):
        n = self.size()
        if n > self.state_limit and not force:
            raise ResourceError(
                f"state space has {n} states, above the limit {self.state_limit}; "
                "reduce inventory_cap/count_cap/demand_cap or raise the limit", size=n)
        return n


class ValueTable:
    """Optimal values and smallest optimal orders for every period."""

    def __init__(self, instance, states, signals, values, orders):
        self.instance = instance
        self.states = states
        self.signals = signals          # signals[t-1] = list of z
        self.values = values            # values[t-1][iz, ix]
        self.orders = orders            # orders[t-1][iz, ix]
        self._sidx = {s: i for i, s in enumerate(states)}
        self._zidx = [{z: i for i, z in enumerate(zs)} for zs in signals]

    @property
    def T(self):
        return len(self.values)

    def index(self, x):
        try:
            return self._sidx[tuple(int(v) for v in x)]
        except KeyError:
            raise IndexError(f"state {tuple(x)} outside the inventory cap") from None

    def _z(self, t, z):
        try:
            return self._zidx[t - 1][tuple(z)]
        except KeyError:
            raise IndexError(f"signal {z} not in the state space of period {t}") from None

    def value(self, t, x, z=()):
        if t == self.T + 1:
            self.index(x)
            return 0.0
        return float(self.values[t - 1][self._z(t, z), self.index(x)])

    def order(self, t, x, z=()):
        return int(self.orders[t - 1][self._z(t, z), self.index(x)])

    def expected_cost(self, x=None):
        """Expected optimal cost from ``x`` (default empty) at period 1,
        averaged over the initial signal."""
        x = (0,) * (self.instance.K - 1) if x is None else x
        init = self.instance.model.dp_initial(self.instance.count_cap)
        return math.fsum(p * self.value(1, x, z) for z, p in init)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "signal", "inventory", "value", "order"])
            for t in range(1, self.T + 1):
                for iz, z in enumerate(self.signals[t - 1]):
                    for ix, x in enumerate(self.states):
                        writer.writerow([t, " ".join(map(str, z)), " ".join(map(str, x)),
                                         repr(float(self.values[t - 1][iz, ix])),
                                         int(self.orders[t - 1][iz, ix])])


def _transition_tensors(instance, states):
    """Next-state index and undiscounted period cost for every
    (state, order, demand) triple."""
    M = instance.inventory_cap
    dmax = instance.max_demand()
    K = instance.K
    radix = (M + 1) ** np.arange(K - 1)[::-1]
    X = np.array(states, dtype=np.int64).reshape(len(states), K - 1)
    q = np.arange(M + 1)[None, :, None]
    d = np.arange(dmax + 1)[None, None, :]
    stock = [np.broadcast_to(q, (len(states), M + 1, dmax + 1))]
    stock += [np.broadcast_to(X[:, k - 1][:, None, None], stock[0].shape)
              for k in range(1, K)]
    remaining = np.broadcast_to(d, stock[0].shape).copy()
    left = [None] * K
    for k in range(K - 1, -1, -1):
        take = np.minimum(stock[k], remaining)
        left[k] = stock[k] - take
        remaining = remaining - take
    nxt = np.zeros(stock[0].shape, dtype=np.int64)
    for k in range(K - 1):
        # next age k+1 holds today's age-k leftovers
        nxt += np.minimum(left[k], M) * radix[k]
    par = instance.params
    y = X.sum(axis=1)[:, None, None] + q
    cost = (par.p * np.maximum(d - y, 0) + par.h * np.maximum(y - d, 0)
            + par.w * np.maximum(X[:, K - 2][:, None, None] - d, 0)).astype(float)
    return nxt, cost


def _check_state_order(states, M, K):
    expect = list(itertools.product(range(M + 1), repeat=K - 1))
    if states != expect:
        raise AssertionError("state enumeration does not match the radix encoding")


def solve_opt(instance: DPInstance, force=False):
    """Backward induction over ``t = T..1`` on (inventory, signal) states."""
    instance.check_size(force)
    states = instance.inventory_states()
    K, M, T = instance.K, instance.inventory_cap, instance.T
    _check_state_order(states, M, K)
    beta = instance.params.beta
    nxt, cost = _transition_tensors(instance, states)
    totals = np.array([sum(s) for s in states])
    n_states = len(states)
    qgrid = np.arange(M + 1)
    model, cc = instance.model, instance.count_cap

    values = [None] * T
    orders = [None] * T
    signals = [instance.signal_states(t) for t in range(1, T + 1)]
    V_next, z_next = np.zeros((1, n_states)), {(): 0}
    next_signals = None
    for t in range(T, 0, -1):
        zs = signals[t - 1]
        if t < T:
            next_signals = signals[t]
            z_next = {z: i for i, z in enumerate(next_signals)}
        V = np.empty((len(zs), n_states))
        A = np.empty((len(zs), n_states), dtype=np.int64)
        # group signals by the period-t demand law and the continuation law
        cache_q = {}
        for iz, z in enumerate(zs):
            dist = instance.distribution(t, z)
            pmf = dist.pmf
            nd = pmf.size
            key_cost = tuple(pmf)
            if key_cost not in cache_q:
                cache_q[key_cost] = cost[:, :, :nd] @ pmf
            Q = cache_q[key_cost].copy()
            if t < T:
                EV = np.zeros(n_states)
                for z2, pr in model.dp_signal_transition(t, z, cc):
                    EV += pr * V_next[z_next[z2]]
                Q += beta * (EV[nxt[:, :, :nd]] @ pmf)
            allowed = qgrid[None, :] <= np.maximum(dist.support_max - totals, 0)[:, None]
            Q = np.where(allowed, Q, np.inf)
            qmin = Q.min(axis=1)
            tol = TIE_RTOL * (1.0 + np.abs(qmin))
            A[iz] = np.argmax(Q <= (qmin + tol)[:, None], axis=1)
            V[iz] = Q[np.arange(n_states), A[iz]]
        values[t - 1], orders[t - 1] = V, A
        V_next = V
    return ValueTable(instance, states, signals, values, orders)


def solve_opt_wof(instance: DPInstance, force=False):
    """Optimal policy that ignores forecast signals (marginal demand laws)."""
    if instance.wof:
        return solve_opt(instance, force)
    flat = DPInstance(K=instance.K, params=instance.params, model=instance.model,
                      demand_cap=instance.demand_cap,
                      state_limit=instance.state_limit, wof=True)
    return solve_opt(flat, force)


def bellman_residual(table: ValueTable):
    """Largest gap between stored values and a direct, loop-based evaluation
    of the optimality equation at the stored orders."""
    inst = table.instance
    par, beta = inst.params, inst.params.beta
    worst = 0.0
    for t in range(1, table.T + 1):
        for z in table.signals[t - 1]:
            dist = inst.distribution(t, z)
            trans = inst.model.dp_signal_transition(t, z, inst.count_cap) if t < table.T else [((), 1.0)]
            for x in table.states:
                q = table.order(t, x, z)
                tot = 0.0
                for d, pd in enumerate(dist.pmf):
                    if pd == 0:
                        continue
                    out = transition(x, q, d)
                    c = period_cost_transformed(x, q, d, par, 1)
                    cont = 0.0
                    if t < table.T:
                        nx = tuple(min(v, inst.inventory_cap) for v in out.next_state)
                        cont = sum(pz * table.value(t + 1, nx, z2) for z2, pz in trans)
                    tot += pd * (c + beta * cont)
                worst = max(worst, abs(tot - table.value(t, x, z)))
    return worst


def cost_to_go_differences(table: ValueTable, t, x, z=()):
    """``C_t(x + e_k) - C_t(x)`` for ``k = 1..K-1`` in period-``t`` money."""
    base = table.value(t, x, z)
    out = []
    for k in range(len(x)):
        up = list(x)
        up[k] += 1
        out.append(table.value(t, up, z) - base)
    return out


class TablePolicy(OrderingPolicy):
    """Plays the orders of a solved value table."""

    def __init__(self, table: ValueTable, name="OPT"):
        self.table = table
        self.name = name
        inst = table.instance
        self._signal = ((lambda info: ()) if inst.wof
                        else (lambda info: inst.model.dp_signal_of(info, inst.count_cap)))

    def decide(self, t, x, info):
        M = self.table.instance.inventory_cap
        xs = tuple(min(int(v), M) for v in x)
        return PolicyDecision(q=self.table.order(t, xs, self._signal(info)))


def _walk(policy, instance, visit, path_limit):
    """Depth-first walk over every demand path; ``visit`` sees each
    decision node with its probability and the demand law."""
    model = instance.model
    if not model.history_only:
        raise CapabilityError("brute force needs demand that depends on history only")
    T = instance.T
    n_paths = 1
    for t in range(1, T + 1):
        n_paths *= int(np.count_nonzero(model.distribution(t).pmf))
    if n_paths > path_limit:
        raise ResourceError(f"{n_paths} demand paths exceed the limit {path_limit}",
                            size=n_paths)

    def rec(t, x, realized, prob):
        if t > T:
            return
        info = InfoSet(t, realized)
        q = policy.order(t, x, info)
        dist = model.distribution(t, info)
        visit(prob, t, x, info, q, dist)
        for d, pd in enumerate(dist.pmf):
            if pd > 0:
                rec(t + 1, transition(x, q, d).next_state, realized + (d,), prob * pd)

    rec(1, (0,) * (instance.K - 1), (), 1.0)


def brute_force_policy_eval(policy, instance: DPInstance, path_limit=DEFAULT_PATH_LIMIT):
    """Exact expected discounted transformed cost of ``policy`` from empty
    inventory, by enumerating every demand path."""
    par = instance.params
    terms = []

    def visit(prob, t, x, info, q, dist):
        for d, pd in enumerate(dist.pmf):
            if pd > 0:
                terms.append(prob * pd * period_cost_transformed(x, q, d, par, t))

    _walk(policy, instance, visit, path_limit)
    return math.fsum(terms)


def brute_force_node_sum(policy, instance: DPInstance, fn, path_limit=DEFAULT_PATH_LIMIT):
    """``E[sum_t fn(t, x_t, info_t, q_t)]`` along the policy's paths."""
    terms = []

    def visit(prob, t, x, info, q, dist):
        terms.append(prob * fn(t, x, info, q))

    _walk(policy, instance, visit, path_limit)
    return math.fsum(terms)


def reachable_states(policy, instance: DPInstance, path_limit=DEFAULT_PATH_LIMIT):
    """Set of ``(t, x, realized)`` decision nodes visited with positive
    probability."""
    seen = []

    def visit(prob, t, x, info, q, dist):
        seen.append((t, tuple(x), info))

    _walk(policy, instance, visit, path_limit)
    return seen


def exact_base_stock(instance: DPInstance, levels=None, path_limit=DEFAULT_PATH_LIMIT):
    """Best constant base-stock level by exact enumeration.

    Returns ``(S*, cost)``; the default grid runs from 0 to the largest
    single-period demand times ``K``.
    """
    from .policies import BaseStockPolicy
    if levels is None:
        levels = range(instance.max_demand() * instance.K + 1)
    best = None
    for S in levels:
        c = brute_force_policy_eval(BaseStockPolicy(S), instance, path_limit)
        if best is None or c < best[1] - TIE_RTOL * (1 + abs(best[1])):
            best = (S, c)
    return best
