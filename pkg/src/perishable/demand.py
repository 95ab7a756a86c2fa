"""Demand processes: conditional laws given the information set, sampling,
and the compound-Poisson surgery model with a perfect short-range forecast.

Integer demand laws are tabulated on ``{0, ..., b}``. The bound ``b`` is the
smallest value whose upper tail ``P(D > b)`` is below ``TAIL_TOL``, and that
tail mass is folded onto ``b`` so every table sums to one.
"""

from __future__ import annotations

import csv
import functools
import itertools
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, stats

from .errors import CapabilityError, ConfigurationError, ValidationError

TAIL_TOL = 1e-9
# slack used when comparing a cdf value against a target probability
CDF_EPS = 1e-12
_MAX_SUPPORT = 100_000


@dataclass(frozen=True)
class InfoSet:
    """What is known at the start of period ``t``.

    ``realized`` holds ``d_1 .. d_{t-1}``. ``signals`` holds model-specific
    forecast data; for the surgery forecast model it is the tuple of surgery
    counts revealed so far (days ``1 .. min(t+L-1, T)``).
    """

    t: int
    realized: tuple = ()
    signals: tuple = ()

    def __post_init__(self):
        if self.t < 1:
            raise ValidationError(f"period index must be >= 1, got {self.t}")
        if len(self.realized) != self.t - 1:
            raise ValidationError(
                f"InfoSet at t={self.t} needs {self.t - 1} realized demands, "
                f"got {len(self.realized)}")


class DiscreteDist:
    """Law on ``{0, 1, ..., len(pmf) - 1}``."""

    def __init__(self, pmf):
        pmf = np.asarray(pmf, dtype=float)
        if pmf.ndim != 1 or pmf.size == 0:
            raise ConfigurationError("pmf must be a non-empty 1-d array")
        if np.any(pmf < 0):
            raise ConfigurationError("pmf has negative entries")
        total = pmf.sum()
        if abs(total - 1.0) > TAIL_TOL:
            raise ConfigurationError(f"pmf sums to {total!r}, not 1")
        self.pmf = pmf / total
        self.pmf.setflags(write=False)
        self._cdf = np.minimum(np.cumsum(self.pmf), 1.0)
        self._cdf[-1] = 1.0

    integer = True

    @property
    def support_max(self):
        return self.pmf.size - 1

    def mean(self):
        return float(np.dot(np.arange(self.pmf.size), self.pmf))

    def pmf_at(self, v):
        if v < 0 or v != math.floor(v) or v > self.support_max:
            return 0.0
        return float(self.pmf[int(v)])

    def cdf(self, x):
        """``P(D <= x)`` for real ``x``."""
        if x < 0:
            return 0.0
        k = int(math.floor(x))
        if k >= self.pmf.size:
            return 1.0
        return float(self._cdf[k])

    def cdf_array(self):
        return self._cdf

    def inverse_cdf(self, prob):
        """Smallest ``v`` with ``P(D <= v) >= prob``."""
        _check_prob(prob)
        idx = int(np.searchsorted(self._cdf, prob - CDF_EPS, side="left"))
        if idx >= self.pmf.size:
            raise ConfigurationError(
                f"probability {prob} exceeds the tabulated mass")
        return idx

    def expected_excess(self, y):
        """``E[(D - y)^+]``."""
        v = np.arange(self.pmf.size)
        return float(np.dot(np.maximum(v - y, 0.0), self.pmf))

    def sample(self, rng, size=None):
        u = rng.random(size)
        out = np.searchsorted(self._cdf, u, side="right")
        return np.minimum(out, self.support_max)


class ContinuousDist:
    """Wrapper around a frozen scipy distribution on ``[0, inf)``."""

    integer = False

    def __init__(self, frozen):
        self.frozen = frozen

    def mean(self):
        return float(self.frozen.mean())

    def cdf(self, x):
        return float(self.frozen.cdf(x))

    def inverse_cdf(self, prob):
        _check_prob(prob)
        return float(self.frozen.ppf(prob))

    def expected_excess(self, y):
        y = max(float(y), 0.0)
        val, _ = integrate.quad(self.frozen.sf, y, np.inf, limit=200)
        return val

    def expected_shortfall(self, y):
        """``E[(y - D)^+]``."""
        if y <= 0:
            return 0.0
        val, _ = integrate.quad(self.frozen.cdf, 0.0, float(y), limit=200)
        return val

    def sample(self, rng, size=None):
        return self.frozen.rvs(size=size, random_state=rng)


def _check_prob(prob):
    if not (0.0 < prob <= 1.0):
        raise ValidationError(f"probability must lie in (0, 1], got {prob}")


def _fold(values, bound, tail):
    pmf = np.array(values[: bound + 1], dtype=float)
    pmf[bound] += max(tail, 0.0)
    return pmf / pmf.sum()


def _tabulate(pmf_fn, sf_fn, bound=None):
    """Tabulate a law on the nonnegative integers with tail folding."""
    if bound is None:
        n = 64
        while True:
            sf = sf_fn(np.arange(n))
            hit = np.nonzero(sf < TAIL_TOL)[0]
            if hit.size:
                bound = int(hit[0])
                break
            if n > _MAX_SUPPORT:
                raise ConfigurationError("demand support too large to tabulate")
            n *= 4
    else:
        bound = int(bound)
        if bound < 0:
            raise ConfigurationError("truncation bound must be nonnegative")
        if sf_fn(np.array([bound]))[0] >= TAIL_TOL:
            raise ConfigurationError(
                f"truncation bound {bound} leaves tail mass >= {TAIL_TOL}")
    values = pmf_fn(np.arange(bound + 1))
    return _fold(values, bound, sf_fn(np.array([bound]))[0])


def geometric_theta(mean):
    """Ratio ``theta`` of the geometric law ``P(X=j) = (1-theta) theta^j``."""
    if mean <= 0:
        raise ConfigurationError("per-arrival mean must be positive")
    return mean / (1.0 + mean)


@functools.lru_cache(maxsize=4096)
def negative_binomial_table(n, theta):
    """Law of a sum of ``n`` i.i.d. geometrics on {0,1,...} with ratio theta."""
    if n == 0:
        return DiscreteDist([1.0])
    dist = stats.nbinom(n, 1.0 - theta)
    return DiscreteDist(_tabulate(dist.pmf, dist.sf))


@functools.lru_cache(maxsize=1024)
def poisson_table(lam, bound=None):
    if lam == 0:
        return DiscreteDist([1.0])
    dist = stats.poisson(lam)
    return DiscreteDist(_tabulate(dist.pmf, dist.sf, bound))


def _panjer(lam, theta, n):
    """First ``n`` probabilities of a compound Poisson with geometric sizes."""
    g = np.zeros(n)
    g[0] = math.exp(-lam * theta)
    j = np.arange(1, n)
    jf = j * (1.0 - theta) * theta ** j
    for k in range(1, n):
        g[k] = lam / k * np.dot(jf[:k], g[k - 1::-1])
    return g


@functools.lru_cache(maxsize=1024)
def compound_poisson_table(lam, theta, bound=None):
    """Poisson(lam) arrivals, geometric(theta) units per arrival."""
    if lam == 0:
        return DiscreteDist([1.0])
    n = 64
    while True:
        g = _panjer(lam, theta, n)
        tail = 1.0 - np.cumsum(g)
        if bound is not None and bound < n:
            if tail[bound] >= TAIL_TOL:
                raise ConfigurationError(
                    f"truncation bound {bound} leaves tail mass >= {TAIL_TOL}")
            return DiscreteDist(_fold(g, bound, tail[bound]))
        hit = np.nonzero(tail < TAIL_TOL)[0]
        if bound is None and hit.size:
            b = int(hit[0])
            return DiscreteDist(_fold(g, b, tail[b]))
        if n > _MAX_SUPPORT:
            raise ConfigurationError("demand support too large to tabulate")
        n *= 4


@dataclass(frozen=True)
class CompoundPoissonSpec:
    """Surgery-driven demand: per-weekday Poisson arrival means (indexed by
    ``(t-1) mod len``) and a geometric number of units per arrival."""

    arrival_means: tuple
    per_arrival_mean: float
    truncation_bound: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "arrival_means",
                           tuple(float(m) for m in self.arrival_means))
        if not self.arrival_means:
            raise ConfigurationError("arrival_means must not be empty")
        if any(m < 0 for m in self.arrival_means):
            raise ConfigurationError("arrival means must be nonnegative")
        if self.per_arrival_mean <= 0:
            raise ConfigurationError("per-arrival mean must be positive")

    @property
    def theta(self):
        return geometric_theta(self.per_arrival_mean)

    def arrival_mean(self, s):
        return self.arrival_means[(s - 1) % len(self.arrival_means)]


class DemandModel(ABC):
    """Demand process over periods ``1..horizon``.

    ``independent`` means future demands are independent given the current
    information set, which is what the closed-form marginal costs need.
    """

    independent = True
    integer = True
    # the law of D_s given f_t depends on past demands only
    history_only = True

    def __init__(self, horizon):
        if horizon < 1:
            raise ConfigurationError("horizon must be >= 1")
        self.horizon = int(horizon)

    def _check(self, s, info):
        if not 1 <= s <= self.horizon:
            raise IndexError(f"period {s} outside horizon 1..{self.horizon}")
        if info is not None and s < info.t:
            raise IndexError(f"period {s} precedes information period {info.t}")

    @abstractmethod
    def distribution(self, s, info=None):
        """Law of ``D_s`` given ``info``."""

    def pmf(self, s, info=None):
        dist = self.distribution(s, info)
        if not dist.integer:
            raise CapabilityError("model has no probability mass function")
        return dist.pmf

    def mean(self, s, info=None):
        return self.distribution(s, info).mean()

    def initial_info(self):
        return InfoSet(1)

    def info_at(self, info, tau):
        """Information set at an earlier period ``tau <= info.t``."""
        return InfoSet(tau, info.realized[: tau - 1])

    def info_key(self, info):
        """Hashable summary of ``info`` sufficient for the conditional law of
        ``D_t, D_{t+1}, ...``."""
        return ()

    @abstractmethod
    def sample_path(self, seed):
        """Return ``(demands, infos)`` for one scenario."""

    def sample_window(self, t, info, length, rng, size):
        """Sample ``size`` joint draws of ``D_t .. D_{t+length-1}`` given info."""
        cols = [np.asarray(self.distribution(t + j, info).sample(rng, size))
                for j in range(length)]
        return np.column_stack(cols) if cols else np.zeros((size, 0))

    def variants(self, s):
        """Every conditional law ``D_s`` can have given ``f_s``."""
        return [self.distribution(s)]

    def marginal(self):
        """Forecast-free version of this model."""
        return self

    # dynamic-programming hooks; the signal state ``z`` summarizes forecasts
    def dp_initial(self, count_cap=None):
        return [((), 1.0)]

    def dp_signal_states(self, t, count_cap=None):
        return [()]

    def dp_signal_transition(self, t, z, count_cap=None):
        return [((), 1.0)]

    def dp_distribution(self, t, z):
        return self.distribution(t)

    def dp_signal_of(self, info, count_cap=None):
        return ()


class IndependentDemand(DemandModel):
    """Independent (possibly non-stationary) integer demand given as pmfs."""

    def __init__(self, pmfs: Sequence[Sequence[float]]):
        super().__init__(len(pmfs))
        self.dists = [p if isinstance(p, DiscreteDist) else DiscreteDist(p)
                      for p in pmfs]

    def distribution(self, s, info=None):
        self._check(s, info)
        return self.dists[s - 1]

    def sample_path(self, seed):
        rng = np.random.default_rng(seed)
        u = rng.random(self.horizon)
        d = np.array([min(int(np.searchsorted(dist.cdf_array(), ui, side="right")),
                          dist.support_max)
                      for dist, ui in zip(self.dists, u)], dtype=np.int64)
        return d, _history_infos(d)


def point_mass_demand(values):
    """Deterministic integer demand ``D_s = values[s-1]``."""
    pmfs = []
    for v in values:
        if v < 0 or int(v) != v:
            raise ConfigurationError("point masses must be nonnegative integers")
        p = np.zeros(int(v) + 1)
        p[-1] = 1.0
        pmfs.append(p)
    return IndependentDemand(pmfs)


def iid_demand(pmf, horizon):
    dist = DiscreteDist(pmf)
    return IndependentDemand([dist] * horizon)


def _history_infos(d, signals=None):
    out = []
    for t in range(1, len(d) + 1):
        sig = () if signals is None else signals[t - 1]
        out.append(InfoSet(t, tuple(int(v) for v in d[: t - 1]), sig))
    return out


def _sample_surgeries(spec, horizon, rng):
    lam = np.array([spec.arrival_mean(s) for s in range(1, horizon + 1)])
    counts = rng.poisson(lam)
    units = np.zeros(horizon, dtype=np.int64)
    pos = counts > 0
    if np.any(pos):
        units[pos] = rng.negative_binomial(counts[pos], 1.0 - spec.theta)
    return counts.astype(np.int64), units


class CompoundPoissonDemand(DemandModel):
    """Independent compound-Poisson demand without forecast information."""

    def __init__(self, spec: CompoundPoissonSpec, horizon):
        super().__init__(horizon)
        self.spec = spec

    def distribution(self, s, info=None):
        self._check(s, info)
        return compound_poisson_table(self.spec.arrival_mean(s), self.spec.theta,
                                      self.spec.truncation_bound)

    def sample_path(self, seed):
        rng = np.random.default_rng(seed)
        _, d = _sample_surgeries(self.spec, self.horizon, rng)
        return d, _history_infos(d)


class ForecastCompoundPoissonDemand(DemandModel):
    """Compound-Poisson demand where the surgery count of day ``s`` is known
    exactly from period ``s - L + 1`` on (``L`` = forecast horizon).

    Inside the forecast window ``D_s`` is a negative binomial (sum of a known
    number of geometrics); beyond it, compound Poisson.
    """

    history_only = False

    def __init__(self, spec: CompoundPoissonSpec, horizon, forecast_horizon=3):
        super().__init__(horizon)
        if forecast_horizon < 1:
            raise ConfigurationError("forecast horizon must be >= 1")
        self.spec = spec
        self.forecast_horizon = int(forecast_horizon)

    def _known_until(self, t):
        return min(t + self.forecast_horizon - 1, self.horizon)

    def _count(self, s, info):
        if info is None or s > self._known_until(info.t):
            return None
        if len(info.signals) < s:
            raise ValidationError(
                f"InfoSet at t={info.t} lacks the surgery count of day {s}")
        return int(info.signals[s - 1])

    def distribution(self, s, info=None):
        self._check(s, info)
        n = self._count(s, info)
        if n is None:
            return compound_poisson_table(self.spec.arrival_mean(s),
                                          self.spec.theta,
                                          self.spec.truncation_bound)
        return negative_binomial_table(n, self.spec.theta)

    def initial_info(self):
        raise CapabilityError("initial info of the forecast model is random; "
                              "use sample_path")

    def info_at(self, info, tau):
        return InfoSet(tau, info.realized[: tau - 1],
                       info.signals[: self._known_until(tau)])

    def info_key(self, info):
        return tuple(info.signals[info.t - 1: self._known_until(info.t)])

    def sample_path(self, seed):
        rng = np.random.default_rng(seed)
        counts, d = _sample_surgeries(self.spec, self.horizon, rng)
        signals = [tuple(int(c) for c in counts[: self._known_until(t)])
                   for t in range(1, self.horizon + 1)]
        return d, _history_infos(d, signals)

    def count_table(self, s, count_cap=None):
        lam = self.spec.arrival_mean(s)
        if lam == 0:
            return DiscreteDist([1.0])
        base = poisson_table(lam)
        if count_cap is None or count_cap >= base.support_max:
            return base
        p = np.array(base.pmf[: count_cap + 1])
        p[count_cap] += base.pmf[count_cap + 1:].sum()
        return DiscreteDist(p)

    def variants(self, s):
        counts = self.count_table(s)
        return [negative_binomial_table(n, self.spec.theta)
                for n in range(counts.support_max + 1) if counts.pmf[n] > 0]

    def marginal(self):
        return CompoundPoissonDemand(self.spec, self.horizon)

    def _window_days(self, t):
        return range(t, t + self.forecast_horizon)

    def dp_initial(self, count_cap=None):
        tables = [self.count_table(s, count_cap) if s <= self.horizon else None
                  for s in self._window_days(1)]
        choices = [range(tb.support_max + 1) if tb else [0] for tb in tables]
        out = []
        for z in itertools.product(*choices):
            prob = 1.0
            for tb, n in zip(tables, z):
                if tb is not None:
                    prob *= tb.pmf[n]
            if prob > 0:
                out.append((z, prob))
        return out

    def dp_signal_states(self, t, count_cap=None):
        choices = []
        for s in self._window_days(t):
            if s > self.horizon:
                choices.append([0])
            else:
                choices.append(range(self.count_table(s, count_cap).support_max + 1))
        return list(itertools.product(*choices))

    def dp_signal_transition(self, t, z, count_cap=None):
        new_day = t + self.forecast_horizon
        if new_day > self.horizon:
            return [(tuple(z[1:]) + (0,), 1.0)]
        tb = self.count_table(new_day, count_cap)
        return [(tuple(z[1:]) + (n,), float(tb.pmf[n]))
                for n in range(tb.support_max + 1) if tb.pmf[n] > 0]

    def dp_distribution(self, t, z):
        return negative_binomial_table(int(z[0]), self.spec.theta)

    def dp_signal_of(self, info, count_cap=None):
        out = []
        for s in self._window_days(info.t):
            if s > self.horizon:
                out.append(0)
            else:
                n = int(info.signals[s - 1])
                cap = self.count_table(s, count_cap).support_max
                out.append(min(n, cap))
        return tuple(out)


class ContinuousDemand(DemandModel):
    """Independent continuous demand (used for the FIFO-condition checks)."""

    integer = False

    def __init__(self, frozen_dists):
        super().__init__(len(frozen_dists))
        self.dists = [d if isinstance(d, ContinuousDist) else ContinuousDist(d)
                      for d in frozen_dists]

    def distribution(self, s, info=None):
        self._check(s, info)
        return self.dists[s - 1]

    def sample_path(self, seed):
        rng = np.random.default_rng(seed)
        d = np.array([dist.sample(rng) for dist in self.dists], dtype=float)
        infos = [InfoSet(t, tuple(float(v) for v in d[: t - 1]))
                 for t in range(1, self.horizon + 1)]
        return d, infos


def exponential_demand(means):
    return ContinuousDemand([stats.expon(scale=m) for m in means])


def uniform_demand(lows, highs):
    return ContinuousDemand([stats.uniform(loc=a, scale=b - a)
                             for a, b in zip(lows, highs)])


def conditional_pmf(model, s, info, v):
    """``P(D_s = v | f_t)``."""
    if v < 0:
        raise ValidationError("demand value must be nonnegative")
    return model.distribution(s, info).pmf_at(v)


def sample_path(model, seed):
    """One demand scenario; a pure function of ``(model, seed)``."""
    return model.sample_path(seed)


def inverse_cdf(model, s, info, prob):
    """``inf{x : Phi_s(x) >= prob}`` for the law of ``D_s`` given ``info``."""
    return model.distribution(s, info).inverse_cdf(prob)


def export_pmf_csv(model, path, info=None):
    """Write the tabulated pmf of every period to ``path`` (debug aid)."""
    start = 1 if info is None else info.t
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["period", "value", "probability"])
        for s in range(start, model.horizon + 1):
            for v, p in enumerate(model.pmf(s, info)):
                writer.writerow([s, v, repr(float(p))])
