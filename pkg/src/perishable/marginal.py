"""Marginal-cost accounting for units ordered in period ``t``.

``P`` is the expected shortage penalty of period ``t``; ``H`` and ``W`` are
the expected holding and outdating costs the ``q`` new units will incur over
their remaining life. All three are discounted to period 1.

For demand that is integer-valued and independent given the information set,
everything follows from the outdate probabilities

    R_k(u) = P(A_{k-1} + D_{t+k-1} < u),   k = 1..K,

where ``A_k`` is the demand over ``t..t+k-1`` left unserved by the ``k``
oldest cohorts. Otherwise the expectations are estimated by sampling.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, SearchBoundError, ValidationError

DEFAULT_MC_SAMPLES = 20_000


@dataclass(frozen=True)
class MarginalCostTriple:
    P: float
    H: float
    W: float
    se: tuple | None = None

    @property
    def total(self):
        return self.P + self.H + self.W

    @property
    def over(self):
        """Marginal cost of over-ordering, ``H + W``."""
        return self.H + self.W


def window_length(K, t, T):
    """Number of periods ``t, t+1, ...`` a unit ordered at ``t`` can live
    inside the horizon."""
    return min(K, T - t + 1)


def _int_state(x):
    xi = tuple(int(v) for v in x)
    if any(a != b for a, b in zip(xi, x)):
        raise CapabilityError("closed-form marginal costs need integer inventory")
    if any(v < 0 for v in xi):
        raise ValidationError("negative inventory")
    return xi


def _require_closed_form(model):
    if not (model.independent and model.integer):
        raise CapabilityError(
            "closed form needs integer demand that is independent given the "
            "information set; use mc_marginal_triple")


@dataclass(frozen=True)
class OutdateProbTable:
    """``R[k-1][u] = R_k(u)`` for ``k = 1..len(R)``."""

    x: tuple
    t: int
    R: tuple

    def __call__(self, k, u):
        arr = self.R[k - 1]
        if u <= 0:
            return 0.0
        if u >= arr.size:
            raise IndexError(f"R_{k}({u}) beyond tabulated range {arr.size - 1}")
        return float(arr[u])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "u", "R"])
            for k, arr in enumerate(self.R, start=1):
                for u, val in enumerate(arr):
                    writer.writerow([k, u, repr(float(val))])


def outdate_prob_table(x, t, info, model, q_max=None):
    """Outdate probabilities ``R_1..R_L`` with ``L = min(K, T-t+1)``.

    ``R_k`` is tabulated on ``u = 0..q_max + x_1 + ... + x_{K-k}``, which is
    what both the recursion and the holding/outdating sums require.
    """
    _require_closed_form(model)
    x = _int_state(x)
    K = len(x) + 1
    L = window_length(K, t, model.horizon)
    if q_max is None:
        q_max = default_search_cap(x, t, info, model)
    q_max = int(q_max)

    def top(k):
        return q_max + sum(x[: K - k])

    pmf1 = model.pmf(t, info)
    n1 = top(1)
    R1 = np.ones(n1 + 1)
    R1[0] = 0.0
    m = min(pmf1.size, n1)
    R1[1: m + 1] = np.cumsum(pmf1)[:m]
    R = [R1]
    for k in range(2, L + 1):
        nk = top(k)
        shift = x[K - k]
        g = np.zeros(nk + 1)
        g[1:] = R[-1][1 + shift: nk + 1 + shift]
        pmf = model.pmf(t + k - 1, info)
        R.append(np.convolve(g, pmf)[: nk + 1])
    for arr in R:
        arr.setflags(write=False)
    return OutdateProbTable(x=x, t=t, R=tuple(R))


def default_search_cap(x, t, info, model):
    """Order size beyond which the shortage term is identically zero."""
    bound = model.distribution(t, info).support_max
    return max(0, int(bound - sum(x)))


def _expected_excess_grid(pmf, y0, n):
    """``E[(D - y)^+]`` for ``y = y0, ..., y0 + n - 1``."""
    sf = np.concatenate([np.cumsum(pmf[::-1])[::-1][1:], [0.0]])
    tail = np.cumsum(sf[::-1])[::-1]  # tail[y] = sum_{u >= y} P(D > u)
    ys = np.arange(y0, y0 + n)
    out = np.zeros(n)
    ok = ys < tail.size
    out[ok] = tail[ys[ok]]
    return out


class LatticeCurve:
    """Closed-form ``P, H, W`` on ``q = 0..cap`` for integer demand and stock.

    Between integers every term is linear in ``q``, so ``triple`` interpolates
    exactly for fractional orders.
    """

    def __init__(self, x, t, info, params, model, cap=None, table=None):
        _require_closed_form(model)
        x = _int_state(x)
        self.x, self.t, self.info = x, t, info
        K = len(x) + 1
        T = model.horizon
        if cap is None:
            cap = default_search_cap(x, t, info, model)
        self.cap = int(cap)
        if table is None or len(table.R[0]) < self.cap + sum(x) + 1:
            table = outdate_prob_table(x, t, info, model, self.cap)
        self.table = table
        b = params.beta
        n = self.cap + 1
        L = window_length(K, t, T)

        self.P = b ** (t - 1) * params.p * _expected_excess_grid(
            model.pmf(t, info), sum(x), n)
        H = np.zeros(n)
        for k in range(L):
            S = sum(x[: K - k - 1])
            Rk = table.R[k][1 + S: n + S]
            H[1:] += b ** (t + k - 1) * params.h * np.cumsum(Rk)
        self.H = H
        W = np.zeros(n)
        if L == K:
            W[1:] = b ** (t + K - 2) * params.w * np.cumsum(table.R[K - 1][1:n])
        self.W = W

    @property
    def total(self):
        return self.P + self.H + self.W

    def _interp(self, arr, q):
        if q < 0:
            raise ValidationError("order quantity must be nonnegative")
        if q > self.cap:
            raise SearchBoundError(f"q={q} beyond tabulated cap {self.cap}")
        lo = int(math.floor(q))
        if lo == q:
            return float(arr[lo])
        frac = q - lo
        return float((1 - frac) * arr[lo] + frac * arr[lo + 1])

    def triple(self, q):
        return MarginalCostTriple(self._interp(self.P, q), self._interp(self.H, q),
                                  self._interp(self.W, q))

    def arrays(self, qs):
        idx = np.asarray(qs).astype(int)
        return self.P[idx], self.H[idx], self.W[idx]

    def breakpoints(self):
        return np.arange(self.cap + 1, dtype=float)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["q", "P", "H", "W", "Gamma"])
            for q in range(self.cap + 1):
                writer.writerow([q, repr(self.P[q]), repr(self.H[q]),
                                 repr(self.W[q]), repr(self.P[q] + self.H[q] + self.W[q])])


def _merge(vals, probs):
    """Combine equal atoms (up to float noise) of a discrete law."""
    keep = probs > 0
    key = np.round(vals[keep], 9)
    u, inv = np.unique(key, return_inverse=True)
    return u, np.bincount(inv, weights=probs[keep])


class _Shortfall:
    """``q -> E[(q - Z)^+]`` for a finite law of ``Z >= 0``."""

    def __init__(self, z, probs):
        order = np.argsort(z, kind="stable")
        self.z = z[order]
        self.F = np.cumsum(probs[order])
        self.G = np.cumsum(probs[order] * self.z)

    def __call__(self, q):
        i = int(np.searchsorted(self.z, q, side="left"))
        if i == 0:
            return 0.0
        return float(q * self.F[i - 1] - self.G[i - 1])

    def many(self, qs):
        i = np.searchsorted(self.z, qs, side="left")
        F = np.where(i > 0, self.F[i - 1], 0.0)
        G = np.where(i > 0, self.G[i - 1], 0.0)
        return qs * F - G


class AtomCurve:
    """Exact ``P, H, W`` for real-valued stock and orders under integer
    demand.

    The unserved demand ``A_k`` is carried as a finite list of atoms, so the
    new cohort's expected leftover in each period of its life is
    ``E[(q - Z_k)^+]`` for an explicit finite law of ``Z_k``.
    """

    def __init__(self, x, t, info, params, model, cap=None):
        _require_closed_form(model)
        x = tuple(float(v) for v in x)
        if any(v < 0 for v in x):
            raise ValidationError("negative inventory")
        K = len(x) + 1
        L = window_length(K, t, model.horizon)
        b = params.beta
        self.x, self.t, self.params = x, t, params
        self.dist = model.distribution(t, info)
        self._p = b ** (t - 1) * params.p
        self._excess = _expected_excess_grid(self.dist.pmf, 0, self.dist.pmf.size + 1)
        self.cap = float(cap) if cap is not None else max(
            0.0, float(math.ceil(self.dist.support_max - sum(x))))
        self._hold, self._out = [], None
        av, ap = np.zeros(1), np.ones(1)
        for k in range(L):
            pmf = model.pmf(t + k, info)
            vals, probs = _merge((av[:, None] + np.arange(pmf.size)[None, :]).ravel(),
                                 (ap[:, None] * pmf[None, :]).ravel())
            z = np.maximum(vals - sum(x[: K - k - 1]), 0.0)
            fn = _Shortfall(z, probs)
            if params.h:
                self._hold.append((b ** (t + k - 1) * params.h, fn))
            if k == K - 1:
                self._out = (b ** (t + K - 2) * params.w, fn)
            else:
                av, ap = _merge(np.maximum(vals - x[K - k - 2], 0.0), probs)

    def triple(self, q):
        if q < 0:
            raise ValidationError("order quantity must be nonnegative")
        y = sum(self.x) + q
        P = self._p * self.dist.expected_excess(y)
        H = math.fsum(c * fn(q) for c, fn in self._hold)
        W = self._out[0] * self._out[1](q) if self._out else 0.0
        return MarginalCostTriple(P, H, W)

    def arrays(self, qs):
        """Vectorized ``P, H, W`` on an array of orders."""
        qs = np.asarray(qs, dtype=float)
        P = self._p * np.interp(sum(self.x) + qs, np.arange(self._excess.size),
                                self._excess)
        H = np.zeros(qs.shape)
        for c, fn in self._hold:
            H += c * fn.many(qs)
        W = self._out[0] * self._out[1].many(qs) if self._out else np.zeros(qs.shape)
        return P, H, W

    def breakpoints(self):
        """Every kink of ``P``, ``H`` and ``W`` in ``[0, cap]`` plus both ends;
        all three are linear between consecutive points."""
        s = sum(self.x)
        pts = [np.array([0.0, self.cap]), np.arange(math.ceil(s), self.dist.support_max + 1) - s]
        pts += [fn.z for _, fn in self._hold]
        if self._out:
            pts.append(self._out[1].z)
        pts = np.unique(np.concatenate(pts))
        return pts[(pts >= 0) & (pts <= self.cap)]


def _window_draws(x, t, info, model, n_samples, seed):
    K = len(x) + 1
    L = window_length(K, t, model.horizon)
    rng = np.random.default_rng(seed)
    return model.sample_window(t, info, L, rng, n_samples).astype(float)


def _sample_costs(x, t, q, params, D, K):
    """Per-sample marginal costs from demand draws ``D`` of shape (n, L)."""
    b = params.beta
    n, L = D.shape
    y = sum(x) + q
    P = b ** (t - 1) * params.p * np.maximum(D[:, 0] - y, 0.0)
    H = np.zeros(n)
    A = np.zeros(n)
    for k in range(L):
        S = sum(x[: K - k - 1])
        left = np.maximum(q - np.maximum(A + D[:, k] - S, 0.0), 0.0)
        H += b ** (t + k - 1) * params.h * left
        if k < K - 1:
            A = np.maximum(A + D[:, k] - x[K - k - 2], 0.0)
    W = np.zeros(n)
    if L == K:
        W = b ** (t + K - 2) * params.w * np.maximum(q - A - D[:, K - 1], 0.0)
    return P, H, W


class SampledCurve:
    """Sample-average ``P, H, W`` from one fixed set of demand draws, so the
    estimates are monotone in ``q`` like the exact functions."""

    def __init__(self, x, t, info, params, model, n_samples=DEFAULT_MC_SAMPLES,
                 seed=0, cap=None):
        self.x = tuple(x)
        self.K = len(self.x) + 1
        self.t, self.params = t, params
        self.D = _window_draws(self.x, t, info, model, n_samples, seed)
        top = float(self.D[:, 0].max()) if self.D.size else 0.0
        self.cap = cap if cap is not None else max(0.0, math.ceil(top - sum(self.x)))

    def triple(self, q):
        if q < 0:
            raise ValidationError("order quantity must be nonnegative")
        P, H, W = _sample_costs(self.x, self.t, q, self.params, self.D, self.K)
        n = self.D.shape[0]
        se = tuple(float(a.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
                   for a in (P, H, W))
        return MarginalCostTriple(float(P.mean()), float(H.mean()), float(W.mean()), se)


class SinglePeriodCurve:
    """Exact ``P`` and ``H`` by quadrature when only period ``t`` remains
    (``W = 0``); used for continuous demand laws."""

    def __init__(self, x, t, info, params, model):
        K = len(x) + 1
        if window_length(K, t, model.horizon) != 1:
            raise CapabilityError("quadrature route covers the last period only")
        self.x, self.t, self.params = tuple(x), t, params
        self.dist = model.distribution(t, info)
        self.cap = max(0.0, self.dist.inverse_cdf(1 - 1e-12) - sum(self.x))

    def triple(self, q):
        if q < 0:
            raise ValidationError("order quantity must be nonnegative")
        b, s = self.params.beta ** (self.t - 1), sum(self.x)
        y = s + q
        P = b * self.params.p * self.dist.expected_excess(y)
        H = b * self.params.h * (self.dist.expected_shortfall(y)
                                 - self.dist.expected_shortfall(s))
        return MarginalCostTriple(P, max(H, 0.0), 0.0)


def marginal_curve(x, t, info, params, model, cap=None, method="auto",
                   n_samples=DEFAULT_MC_SAMPLES, seed=0):
    """Pick the evaluation route: closed form for integer independent demand,
    quadrature for a final continuous period, sampling otherwise."""
    if method == "auto":
        if model.integer and model.independent:
            method = "closed"
        elif window_length(len(x) + 1, t, model.horizon) == 1 and model.independent:
            method = "quadrature"
        else:
            method = "mc"
    if method == "closed":
        if all(float(v).is_integer() for v in x):
            return LatticeCurve(x, t, info, params, model, cap)
        method = "atoms"
    if method == "atoms":
        return AtomCurve(x, t, info, params, model, cap)
    if method == "quadrature":
        return SinglePeriodCurve(x, t, info, params, model)
    if method == "mc":
        return SampledCurve(x, t, info, params, model, n_samples, seed, cap)
    raise ValidationError(f"unknown evaluation method {method!r}")


def marginal_shortage(x, t, info, q, params, model):
    """``beta^{t-1} p E[(D_t - y_t)^+ | f_t]``."""
    if q < 0:
        raise ValidationError("order quantity must be nonnegative")
    dist = model.distribution(t, info)
    return params.beta ** (t - 1) * params.p * dist.expected_excess(sum(x) + q)


def _closed_form_curve(x, t, info, q, params, model, table):
    if q < 0:
        raise ValidationError("order quantity must be nonnegative")
    cap = max(int(math.ceil(q)), default_search_cap(x, t, info, model))
    if not all(float(v).is_integer() for v in x):
        return AtomCurve(x, t, info, params, model, cap=cap)
    if table is not None and table.R[0].size < cap + sum(x) + 1:
        table = None
    return LatticeCurve(x, t, info, params, model, cap=cap, table=table)


def marginal_holding(x, t, info, q, params, model, table=None):
    """Expected discounted holding cost charged to the ``q`` new units."""
    return _closed_form_curve(x, t, info, q, params, model, table).triple(q).H


def marginal_outdating(x, t, info, q, params, model, table=None):
    """Expected discounted outdating cost of the ``q`` new units; zero when
    they cannot expire inside the horizon."""
    return _closed_form_curve(x, t, info, q, params, model, table).triple(q).W


def marginal_triple(x, t, info, q, params, model):
    return _closed_form_curve(x, t, info, q, params, model, None).triple(q)


def mc_marginal_triple(x, t, info, q, params, model, n_samples, seed):
    """Sample-average ``(P, H, W)`` with standard errors; works for any model
    that can sample the demand window given ``info``."""
    if n_samples < 1:
        raise ValidationError("n_samples must be >= 1")
    curve = SampledCurve(x, t, info, params, model, n_samples, seed)
    return curve.triple(q)
