"""Ordering policies: marginal-cost dual balancing (B), the myopic lower
bound, truncated balancing (TB) and base-stock policies."""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, SearchBoundError, ValidationError
from .marginal import (DEFAULT_MC_SAMPLES, LatticeCurve, MarginalCostTriple,
                       marginal_curve)

# relative slack when deciding that two Gamma values tie
TIE_RTOL = 1e-12
BALANCE_RTOL = 1e-8


@dataclass(frozen=True)
class PolicyDecision:
    q: float
    triple: MarginalCostTriple | None = None
    lower: float | None = None
    upper: float | None = None
    balancing: float | None = None


def _build_curve(x, t, info, params, model, search_cap, method, n_samples, seed):
    return marginal_curve(x, t, info, params, model, cap=search_cap, method=method,
                          n_samples=n_samples, seed=seed)


def _grid(curve, mode):
    """Orders at which a piecewise-linear curve must be inspected."""
    if mode == "integer":
        qs = np.arange(int(math.floor(curve.cap)) + 1, dtype=float)
    else:
        qs = curve.breakpoints()
    P, H, W = curve.arrays(qs)
    return qs, P, H + W


def _as_mode(q, mode):
    return int(q) if mode == "integer" else float(q)


def _balance(curve, mode):
    """Balancing order for a prepared curve."""
    if mode not in ("integer", "fractional"):
        raise ValidationError(f"unknown balancing mode {mode!r}")
    if hasattr(curve, "breakpoints"):
        qs, P, over = _grid(curve, mode)
        gap = over - P
        ok = np.nonzero(gap >= 0)[0]
        if ok.size == 0:
            raise SearchBoundError(f"no balancing crossing below search cap {curve.cap}")
        j = int(ok[0])
        if mode == "integer" or j == 0:
            return _as_mode(qs[j], mode)
        # linear between consecutive breakpoints, so interpolation is exact
        lo, hi = qs[j - 1], qs[j]
        return float(lo - gap[j - 1] * (hi - lo) / (gap[j] - gap[j - 1]))
    if mode == "integer":
        cap = int(math.floor(curve.cap))
        top = curve.triple(cap)
        if top.over < top.P:
            raise SearchBoundError(f"no balancing crossing below search cap {cap}")
        lo, hi = -1, cap
        while hi - lo > 1:
            mid = (lo + hi) // 2
            tr = curve.triple(mid)
            if tr.over >= tr.P:
                hi = mid
            else:
                lo = mid
        return hi
    return _bisect(curve)


def _bisect(curve):
    def gap(q):
        tr = curve.triple(q)
        return tr.over - tr.P, tr

    g0, _ = gap(0.0)
    if g0 >= 0:
        return 0.0
    hi = float(curve.cap)
    ghi, _ = gap(hi)
    if ghi < 0:
        raise SearchBoundError(f"no balancing crossing below search cap {hi}")
    lo, glo = 0.0, g0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm, tr = gap(mid)
        if abs(gm) <= 1e-3 * BALANCE_RTOL * (tr.total + 1.0):
            return mid
        if gm < 0:
            lo, glo = mid, gm
        else:
            hi, ghi = mid, gm
        if hi - lo <= 1e-13 * (1.0 + hi):
            break
    cand = lo - glo * (hi - lo) / (ghi - glo) if ghi != glo else hi
    return min((lo, hi, cand), key=lambda q: abs(gap(q)[0]))


def _first_min(qs, gam):
    gmin = gam.min()
    return int(np.nonzero(gam <= gmin + TIE_RTOL * (1.0 + abs(gmin)))[0][0])


def _minimize(curve, mode):
    """Smallest minimizer of ``Gamma = P + H + W`` over the search range."""
    if hasattr(curve, "breakpoints"):
        # Gamma is convex and piecewise linear: its minimum sits on a kink
        qs, P, over = _grid(curve, mode)
        j = _first_min(qs, P + over)
    else:
        if mode == "integer":
            qs = np.arange(int(math.floor(curve.cap)) + 1, dtype=float)
        else:
            qs = np.array([0.0, _golden(curve)])
        trip = [curve.triple(q) for q in qs]
        P = np.array([tr.P for tr in trip])
        j = _first_min(qs, np.array([tr.total for tr in trip]))
    if j == qs.size - 1 and qs[j] >= curve.cap and P[j] > 0:
        raise SearchBoundError(f"Gamma still decreasing at search cap {curve.cap}")
    return _as_mode(qs[j], mode)


def _golden(curve):
    lo, hi = 0.0, float(curve.cap)
    invphi = (math.sqrt(5) - 1) / 2
    a, b = hi - invphi * (hi - lo), lo + invphi * (hi - lo)
    fa, fb = curve.triple(a).total, curve.triple(b).total
    while hi - lo > 1e-10 * (1.0 + hi):
        if fa <= fb:
            hi, b, fb = b, a, fa
            a = hi - invphi * (hi - lo)
            fa = curve.triple(a).total
        else:
            lo, a, fa = a, b, fb
            b = lo + invphi * (hi - lo)
            fb = curve.triple(b).total
    return 0.5 * (lo + hi)


def dual_balancing_quantity(x, t, info, params, model, search_cap=None,
                            mode="fractional", method="auto",
                            n_samples=DEFAULT_MC_SAMPLES, seed=0):
    """Order that balances the marginal shortage penalty against the marginal
    holding plus outdating cost.

    Integer mode returns the smallest integer ``q`` with
    ``H(q) + W(q) >= P(q)``. Fractional mode (the default) returns the
    smallest root of ``P = H + W``: exact for piecewise-linear curves, by
    bisection for sampled ones.
    """
    curve = _build_curve(x, t, info, params, model, search_cap, method, n_samples, seed)
    q = _balance(curve, mode)
    return PolicyDecision(q=q, triple=curve.triple(q), balancing=q)


def myopic_lower_bound(x, t, info, params, model, search_cap=None,
                       mode="fractional", method="auto",
                       n_samples=DEFAULT_MC_SAMPLES, seed=0):
    """Smallest minimizer of the total marginal cost ``P + H + W``."""
    curve = _build_curve(x, t, info, params, model, search_cap, method, n_samples, seed)
    return _minimize(curve, mode)


def critical_fractile(params):
    return params.p / (params.p + params.h) if params.p + params.h > 0 else 0.0


def fractile_level(model, tau, info, params):
    """Newsvendor level ``inf{y : Phi_tau(y) >= p/(p+h)}`` given ``f_tau``."""
    z = critical_fractile(params)
    if z <= 0:
        return 0
    return model.distribution(tau, info).inverse_cdf(z)


def default_upper_bound(x, t, info, params, model, mode="fractile"):
    """``(max_{tau <= t} ybar_tau - sum(x))^+``, or infinity in ``"infinite"``
    mode."""
    if mode == "infinite":
        return math.inf
    if mode != "fractile":
        raise ValidationError(f"unknown upper-bound mode {mode!r}")
    top = max(fractile_level(model, tau, model.info_at(info, tau), params)
              for tau in range(1, t + 1))
    return max(0, top - sum(x))


def _clamp(qB, qL, qU):
    if qL > qU:
        raise ConsistencyError(f"lower bound {qL} exceeds upper bound {qU}")
    return min(max(qB, qL), qU)


def truncated_balancing_quantity(x, t, info, params, model, lower=None, upper=None,
                                 upper_mode="fractile", search_cap=None,
                                 mode="fractional", method="auto",
                                 n_samples=DEFAULT_MC_SAMPLES, seed=0):
    """Balancing order clamped to ``[q^L, q^U]``.

    ``lower`` defaults to the myopic minimizer, ``upper`` to the running-max
    critical fractile bound (``upper_mode="infinite"`` disables it).
    """
    curve = _build_curve(x, t, info, params, model, search_cap, method, n_samples, seed)
    qB = _balance(curve, mode)
    qL = _minimize(curve, mode) if lower is None else lower
    qU = default_upper_bound(x, t, info, params, model, upper_mode) if upper is None else upper
    q = _clamp(qB, qL, qU)
    return PolicyDecision(q=q, triple=curve.triple(q) if q <= curve.cap else None,
                          lower=qL, upper=qU, balancing=qB)


class OrderingPolicy(ABC):
    """Maps ``(t, x, info)`` to an order."""

    name = "policy"

    @abstractmethod
    def decide(self, t, x, info) -> PolicyDecision:
        ...

    def order(self, t, x, info):
        return self.decide(t, x, info).q


class _MarginalPolicy(OrderingPolicy):
    """Shared machinery: decisions are cached on ``(t, x, info_key)``."""

    def __init__(self, model, params, mode="fractional", method="auto",
                 n_samples=DEFAULT_MC_SAMPLES, seed=0, name=None):
        self.model, self.params = model, params
        self.mode, self.method = mode, method
        self.n_samples, self.seed = n_samples, seed
        if name is not None:
            self.name = name
        self._cache = {}

    def _curve(self, t, x, info):
        return _build_curve(x, t, info, self.params, self.model, None, self.method,
                            self.n_samples, (self.seed, t))

    def _key(self, t, x, info):
        return (t, tuple(x), self.model.info_key(info))


class DualBalancingPolicy(_MarginalPolicy):
    name = "B"

    def decide(self, t, x, info):
        key = self._key(t, x, info)
        hit = self._cache.get(key)
        if hit is None:
            curve = self._curve(t, x, info)
            q = _balance(curve, self.mode)
            hit = PolicyDecision(q=q, triple=curve.triple(q), balancing=q)
            self._cache[key] = hit
        return hit


class MyopicPolicy(_MarginalPolicy):
    """Orders the myopic lower bound ``q^L`` every period."""

    name = "L"

    def decide(self, t, x, info):
        key = self._key(t, x, info)
        hit = self._cache.get(key)
        if hit is None:
            curve = self._curve(t, x, info)
            q = _minimize(curve, self.mode)
            hit = PolicyDecision(q=q, triple=curve.triple(q), lower=q)
            self._cache[key] = hit
        return hit


class TruncatedBalancingPolicy(_MarginalPolicy):
    name = "TB"

    def __init__(self, model, params, upper_mode="fractile", **kw):
        super().__init__(model, params, **kw)
        if upper_mode not in ("fractile", "infinite"):
            raise ValidationError(f"unknown upper-bound mode {upper_mode!r}")
        self.upper_mode = upper_mode
        self._fractiles = {}

    def _running_fractile(self, t, info):
        top = -math.inf
        for tau in range(1, t + 1):
            sub = self.model.info_at(info, tau)
            key = (tau, self.model.info_key(sub))
            val = self._fractiles.get(key)
            if val is None:
                val = fractile_level(self.model, tau, sub, self.params)
                self._fractiles[key] = val
            top = max(top, val)
        return top

    def decide(self, t, x, info):
        key = self._key(t, x, info)
        hit = self._cache.get(key)
        if hit is None:
            curve = self._curve(t, x, info)
            hit = (curve, _balance(curve, self.mode), _minimize(curve, self.mode))
            self._cache[key] = hit
        curve, qB, qL = hit
        if self.upper_mode == "infinite":
            qU = math.inf
        else:
            qU = max(0, self._running_fractile(t, info) - sum(x))
        q = _clamp(qB, qL, qU)
        return PolicyDecision(q=q, triple=curve.triple(q), lower=qL, upper=qU,
                              balancing=qB)


class BaseStockPolicy(OrderingPolicy):
    """Order up to ``S`` (or ``S[t-1]`` for a per-period sequence)."""

    name = "BS"

    def __init__(self, S, name=None):
        if np.ndim(S) == 0:
            if S < 0:
                raise ValidationError("base-stock level must be nonnegative")
            self.levels = None
            self.S = S
        else:
            levels = tuple(S)
            if any(s < 0 for s in levels):
                raise ValidationError("base-stock levels must be nonnegative")
            self.levels = levels
            self.S = None
        if name is not None:
            self.name = name

    def level(self, t):
        return self.S if self.levels is None else self.levels[t - 1]

    def decide(self, t, x, info):
        return PolicyDecision(q=max(0, self.level(t) - sum(x)))


def base_stock_policy(S):
    return BaseStockPolicy(S)


def optimal_base_stock(model, params, K, S_range, n_scenarios=1000, seed=0,
                       exact=False):
    """Grid search for the best constant base-stock level.

    Costs are estimated on common random numbers (``exact=False``) or computed
    by enumerating every demand path (``exact=True``, small instances only).
    Returns ``(S*, cost)``; ties go to the smallest level.
    """
    levels = list(S_range)
    if not levels:
        raise ValidationError("empty base-stock grid")
    if exact:
        from .dp import DPInstance, brute_force_policy_eval
        inst = DPInstance(K=K, params=params, model=model)
        costs = [brute_force_policy_eval(BaseStockPolicy(S), inst) for S in levels]
    else:
        from .harness import evaluate
        costs = [evaluate(BaseStockPolicy(S), model, params, K=K,
                          n_scenarios=n_scenarios, seed=seed).mean_cost
                 for S in levels]
    i = int(np.argmin(costs))
    return levels[i], float(costs[i])
