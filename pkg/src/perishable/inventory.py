"""Inventory state, FIFO dynamics and period costs.

An inventory vector is a tuple ``(x_1, ..., x_{K-1})`` of on-hand units by
age at the start of a period; its length fixes the lifetime ``K``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

from .errors import ValidationError


def inventory_vector(levels, K=None):
    """Validate ``levels`` and return it as a tuple."""
    x = tuple(levels)
    if K is not None and len(x) != K - 1:
        raise ValidationError(f"inventory vector for K={K} needs {K - 1} entries")
    if not x:
        raise ValidationError("lifetime K must be at least 2")
    if any(v < 0 for v in x):
        raise ValidationError(f"negative inventory level in {x}")
    return x


def empty_inventory(K):
    return (0,) * (K - 1)


@dataclass(frozen=True)
class CostParams:
    """Original costs: ordering ``c``, shortage ``p``, holding ``h``,
    outdating ``w`` (per unit) and discount factor ``beta``."""

    c: float
    p: float
    h: float
    w: float
    beta: float = 1.0

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ValidationError(f"discount factor must lie in (0, 1], got {self.beta}")
        if self.p - self.c < 0:
            raise ValidationError("shortage penalty must be at least the ordering cost")
        if self.w + self.beta * self.c < 0:
            raise ValidationError("outdating cost plus discounted ordering cost "
                                  "must be nonnegative")


@dataclass(frozen=True)
class TransformedCostParams:
    """Costs of the equivalent zero-ordering-cost problem."""

    p: float
    h: float
    w: float
    beta: float = 1.0

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ValidationError(f"discount factor must lie in (0, 1], got {self.beta}")
        if min(self.p, self.h, self.w) < 0:
            raise ValidationError("transformed costs must be nonnegative")


def transform_costs(orig: CostParams) -> TransformedCostParams:
    c, b = orig.c, orig.beta
    return TransformedCostParams(p=orig.p - c, h=orig.h + (1 - b) * c,
                                 w=orig.w + b * c, beta=b)


@dataclass(frozen=True)
class PeriodOutcome:
    """Result of one period. ``issued[k]`` is the number of age-``k`` units
    used to meet demand (``k = 0`` is the fresh order)."""

    issued: tuple
    lost_sales: float
    outdated: float
    next_state: tuple

    @property
    def sold(self):
        return sum(self.issued)


def transition(x, q, d) -> PeriodOutcome:
    """Order ``q``, face demand ``d``, issue FIFO, age and dispose."""
    x = inventory_vector(x)
    if q < 0 or d < 0:
        raise ValidationError("order and demand must be nonnegative")
    stock = (q,) + x  # index k = age k
    issued = [0] * len(stock)
    remaining = d
    for k in range(len(stock) - 1, -1, -1):
        take = min(stock[k], remaining)
        issued[k] = take
        remaining -= take
    left = [stock[k] - issued[k] for k in range(len(stock))]
    return PeriodOutcome(issued=tuple(issued), lost_sales=remaining,
                         outdated=left[-1], next_state=tuple(left[:-1]))


def _excess(a):
    return a if a > 0 else 0


def period_cost_transformed(x, q, d, params: TransformedCostParams, t):
    """``beta^{t-1} [p (d-y)^+ + h (y-d)^+ + w (x_{K-1}-d)^+]``."""
    y = sum(x) + q
    return params.beta ** (t - 1) * (params.p * _excess(d - y)
                                     + params.h * _excess(y - d)
                                     + params.w * _excess(x[-1] - d))


def period_cost_original(x, q, d, params: CostParams, t):
    y = sum(x) + q
    return params.beta ** (t - 1) * (params.c * q
                                     + params.p * _excess(d - y)
                                     + params.h * _excess(y - d)
                                     + params.w * _excess(x[-1] - d))


@dataclass(frozen=True)
class PeriodRecord:
    t: int
    x: tuple
    q: float
    d: float
    outcome: PeriodOutcome


@dataclass
class SamplePath:
    """Chronological record of one simulated scenario."""

    initial: tuple
    records: list = field(default_factory=list)

    @classmethod
    def from_orders(cls, initial, orders, demands):
        path = cls(inventory_vector(initial))
        x = path.initial
        for t, (q, d) in enumerate(zip(orders, demands), start=1):
            out = transition(x, q, d)
            path.records.append(PeriodRecord(t, x, q, d, out))
            x = out.next_state
        return path

    def append(self, q, d):
        x = self.terminal
        out = transition(x, q, d)
        self.records.append(PeriodRecord(len(self.records) + 1, x, q, d, out))
        return out

    @property
    def terminal(self):
        return self.records[-1].outcome.next_state if self.records else self.initial

    @property
    def horizon(self):
        return len(self.records)

    @property
    def demands(self):
        return [r.d for r in self.records]

    @property
    def orders(self):
        return [r.q for r in self.records]

    def validate(self):
        x = self.initial
        for i, r in enumerate(self.records, start=1):
            if r.t != i or tuple(r.x) != tuple(x):
                raise ValidationError(f"path is not chained at period {i}")
            if r.outcome != transition(r.x, r.q, r.d):
                raise ValidationError(f"outcome at period {i} is not the FIFO transition")
            x = r.outcome.next_state

    def to_csv(self, path, transformed=None, original=None):
        """One row per period: order, demand, issuance, lost sales, outdates
        and (if parameters are given) the cost components."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            head = ["t", "inventory", "q", "d", "issued", "lost", "outdated",
                    "next_inventory"]
            if transformed is not None:
                head.append("transformed_cost")
            if original is not None:
                head.append("original_cost")
            writer.writerow(head)
            for r in self.records:
                row = [r.t, " ".join(map(str, r.x)), r.q, r.d,
                       " ".join(map(str, r.outcome.issued)), r.outcome.lost_sales,
                       r.outcome.outdated, " ".join(map(str, r.outcome.next_state))]
                if transformed is not None:
                    row.append(repr(period_cost_transformed(r.x, r.q, r.d, transformed, r.t)))
                if original is not None:
                    row.append(repr(period_cost_original(r.x, r.q, r.d, original, r.t)))
                writer.writerow(row)


def total_cost_transformed(path: SamplePath, params: TransformedCostParams):
    return math.fsum(period_cost_transformed(r.x, r.q, r.d, params, r.t)
                     for r in path.records)


def total_cost_original(path: SamplePath, params: CostParams):
    """Discounted original cost including the terminal salvage credit of
    ``c`` per unit left after period ``T``."""
    path.validate()
    T = path.horizon
    terms = [period_cost_original(r.x, r.q, r.d, params, r.t) for r in path.records]
    terms.append(-params.beta ** T * params.c * sum(path.terminal))
    return math.fsum(terms)


def lemma1_residual(path: SamplePath, orig: CostParams, transformed=None):
    """Original minus transformed cost minus ``sum beta^{t-1} c d_t``.

    Initial stock is valued at ``c`` per unit, so the residual is zero for
    any starting vector (with an empty start the correction vanishes).
    """
    if transformed is None:
        transformed = transform_costs(orig)
    b = orig.beta
    demand_term = math.fsum(b ** (r.t - 1) * orig.c * r.d for r in path.records)
    return (total_cost_original(path, orig) - total_cost_transformed(path, transformed)
            - demand_term + orig.c * sum(path.initial))
