"""Sufficient conditions for FIFO issuing to be optimal, and the resulting
worst-case guarantees.

Every check takes the transformed costs. Conditions on the demand process
quantify over all information realizations; models expose those through
``variants(s)``, the list of laws ``D_s`` can have given ``f_s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import CapabilityError, ValidationError
from .inventory import CostParams, transform_costs
from .policies import critical_fractile

# slack for comparisons that hold with equality in exact arithmetic
COND_RTOL = 1e-12


def _split(params):
    if isinstance(params, CostParams):
        return transform_costs(params), params
    return params, None


def _fractile(dist, z):
    return 0.0 if z <= 0 else dist.inverse_cdf(z)


def _variant_fractiles(model, params):
    z = critical_fractile(params)
    out = []
    for s in range(1, model.horizon + 1):
        laws = model.variants(s)
        if not laws:
            raise CapabilityError(f"model cannot enumerate the laws of period {s}")
        out.append([(law, _fractile(law, z)) for law in laws])
    return out


@dataclass(frozen=True)
class FractileCheck:
    holds: bool
    fractiles: tuple    # per period: sorted distinct critical fractiles

    def __bool__(self):
        return self.holds


def check_fractile_monotone(model, params):
    """Is ``ybar_t = Phi_t^{-1}(p/(p+h))`` non-decreasing along every
    information path?"""
    params, _ = _split(params)
    per = _variant_fractiles(model, params)
    fr = tuple(tuple(sorted({y for _, y in row})) for row in per)
    # laws of different periods vary independently, so every consecutive
    # pair must be ordered for all combinations
    holds = all(fr[t][-1] <= fr[t + 1][0] for t in range(len(fr) - 1))
    return FractileCheck(holds, fr)


@dataclass(frozen=True)
class CostCondition:
    holds: bool
    bound: float              # (1 - beta) / beta * w
    original_holds: bool | None = None

    def __bool__(self):
        return self.holds


def check_cost_condition(params):
    """``h <= (1 - beta) / beta * w``; with original costs also reports the
    equivalent test on the original holding and outdating costs."""
    tp, orig = _split(params)
    b = tp.beta
    bound = (1 - b) / b * tp.w
    holds = tp.h <= bound + COND_RTOL * (1 + abs(bound))
    orig_ok = None
    if orig is not None:
        ob = (1 - b) / b * orig.w
        orig_ok = orig.h <= ob + COND_RTOL * (1 + abs(ob))
    return CostCondition(holds, bound, orig_ok)


@dataclass(frozen=True)
class MixedCondition:
    holds: bool
    gamma: float
    threshold: float

    def __bool__(self):
        return self.holds


def excess_probability(model, params):
    """``gamma = max_{1 < s <= t <= T} Phi_t(ybar_s)`` over every law the
    periods can have; 0 when the horizon has fewer than two periods."""
    params, _ = _split(params)
    per = _variant_fractiles(model, params)
    T = len(per)
    gamma = 0.0
    for s in range(2, T + 1):
        for t in range(s, T + 1):
            if s == t:
                # the fractile and the cdf come from the same law
                vals = (law.cdf(y) for law, y in per[t - 1])
            else:
                vals = (law.cdf(y) for _, y in per[s - 1] for law, _ in per[t - 1])
            gamma = max(gamma, max(vals))
    return gamma


def mixed_threshold(gamma, params):
    if not 0 <= gamma <= 1:
        raise ValidationError("gamma must lie in [0, 1]")
    if gamma == 0:
        return math.inf
    b = params.beta
    return (1 - gamma) / gamma * params.p + (1 - b * gamma) / (b * gamma) * params.w


def check_mixed_condition(model, params):
    """``h <= (1-gamma)/gamma * p + (1-beta*gamma)/(beta*gamma) * w``."""
    params, _ = _split(params)
    gamma = excess_probability(model, params)
    thr = mixed_threshold(gamma, params)
    holds = params.h <= thr + COND_RTOL * (1 + abs(thr)) if math.isfinite(thr) else True
    return MixedCondition(holds, gamma, thr)


def chao_guarantee(K, params):
    """Guarantee ``2 + (K-2) h / (K h + w)`` of the earlier proportional
    analysis, on transformed costs."""
    if K < 2:
        raise ValidationError("lifetime K must be at least 2")
    params, _ = _split(params)
    den = K * params.h + params.w
    if den == 0:
        return 2.0
    return 2.0 + (K - 2) * params.h / den


@dataclass(frozen=True)
class FifoReport:
    prop3_holds: bool | None
    prop4_holds: bool
    prop5_holds: bool | None
    gamma: float | None
    mixed_threshold: float | None
    our_guarantee: float | None      # None when no condition verifies
    chao_guarantee: float
    fractiles: tuple | None = None

    @property
    def verified(self):
        return self.our_guarantee is not None

    def as_dict(self):
        def num(v):
            return None if v is None or (isinstance(v, float) and math.isinf(v)) else v
        return {
            "fractile_monotone": self.prop3_holds,
            "cost_condition": self.prop4_holds,
            "mixed_condition": self.prop5_holds,
            "gamma": num(self.gamma),
            "mixed_threshold": num(self.mixed_threshold),
            "our_guarantee": self.our_guarantee,
            "guarantee_status": "verified" if self.verified
            else "unverified (2 conditional on FIFO optimality)",
            "chao_guarantee": self.chao_guarantee,
        }

    def to_text(self):
        def fmt(v):
            if v is None:
                return "unknown"
            if isinstance(v, bool):
                return "yes" if v else "no"
            if isinstance(v, float):
                return "inf" if math.isinf(v) else f"{v:.6g}"
            return str(v)
        rows = [("fractile monotone", self.prop3_holds),
                ("cost condition", self.prop4_holds),
                ("mixed condition", self.prop5_holds),
                ("gamma", self.gamma),
                ("mixed threshold", self.mixed_threshold),
                ("our guarantee", self.our_guarantee if self.verified
                 else "unverified (2 conditional on FIFO optimality)"),
                ("earlier guarantee", self.chao_guarantee)]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {fmt(v)}" for k, v in rows)


def guarantee_report(model, params, K):
    """Run all three checks; the guarantee is 2 when any of them holds."""
    tp, _ = _split(params)
    cost = check_cost_condition(params)
    try:
        frac = check_fractile_monotone(model, tp)
        mixed = check_mixed_condition(model, tp)
        p3, p5, gamma, thr, fr = (frac.holds, mixed.holds, mixed.gamma,
                                  mixed.threshold, frac.fractiles)
    except CapabilityError:
        p3 = p5 = gamma = thr = fr = None
    ok = bool(cost.holds or p3 or p5)
    return FifoReport(prop3_holds=p3, prop4_holds=cost.holds, prop5_holds=p5,
                      gamma=gamma, mixed_threshold=thr,
                      our_guarantee=2.0 if ok else None,
                      chao_guarantee=chao_guarantee(K, tp), fractiles=fr)
