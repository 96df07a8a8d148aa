"""Path sampling and exponentially tilted importance sampling of ``{tau_k <= n}``."""
from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .interarrival import InterArrival, TailDominates


class TargetOutOfRange(ValueError):
    pass


class NonMonotoneBracket(ArithmeticError):
    pass


class ExcessOverflow(RuntimeError):
    pass


def n_threads() -> int:
    env = os.environ.get("RENEWAL_ZERO_THREADS")
    if env:
        return max(1, int(env))
    return max(1, min(4, os.cpu_count() or 1))


# --- tilting ------------------------------------------------------------------

def _tilted_sums(d: InterArrival, lam: float):
    """(log Z, mean, second moment, overflow mass) of the law ``f_j e^{-lam j} / Z``."""
    s = d.support_min
    j = np.arange(d.horizon + 1, dtype=float)
    w = d.pmf * np.exp(-lam * (j - s))
    b0 = b1 = b2 = 0.0
    if d.tail_at_horizon > 0 and lam * (d.horizon + 1 - s) < 700:
        if d.extension is not None:
            shift = math.exp(lam * s)
            b0 = d.extension.laplace_beyond(lam, 0)[0] * shift
            b1 = d.extension.laplace_beyond(lam, 1)[0] * shift
            b2 = d.extension.laplace_beyond(lam, 2)[0] * shift
        else:
            bound = d.tail_at_horizon * math.exp(-lam * (d.horizon + 1 - s))
            if bound > 1e-10 * w.sum():
                raise TailDominates("tilted mass past the horizon is not negligible")
    z = math.fsum(w) + b0
    mean = (math.fsum(j * w) + b1) / z
    m2 = (math.fsum(j * j * w) + b2) / z
    return math.log(z) - lam * s, mean, m2, b0 / z


@dataclass(frozen=True)
class TiltSolution:
    lambda_star: float
    nu: float
    nu_prime: float
    tilted_pmf: np.ndarray  # indices 0..N
    log_norm: float  # log(1 - nu(lambda_star))
    target_ratio: float
    overflow_mass: float  # tilted mass past the horizon
    tilted_mean: float
    tilted_second_moment: float

    @classmethod
    def at(cls, d: InterArrival, lam: float, target: float) -> "TiltSolution":
        log_z, mean, m2, over = _tilted_sums(d, lam)
        j = np.arange(d.horizon + 1, dtype=float)
        if lam > 0:
            log_p = np.where(d.pmf > 0, np.log(np.where(d.pmf > 0, d.pmf, 1.0)) - lam * j - log_z, -np.inf)
            pmf = np.exp(log_p)
        else:
            pmf = d.pmf / math.exp(log_z)
        nu = -math.expm1(log_z)
        return cls(lam, nu, mean * (1.0 - nu), pmf, log_z, target, over, mean, m2)


def solve_tilt(d: InterArrival, target_mean: float, rtol: float = 1e-8) -> TiltSolution:
    """Bisection for ``nu'(lam) / (1 - nu(lam)) = target_mean``."""
    s = d.support_min
    if target_mean <= s:
        raise TargetOutOfRange(f"target {target_mean} <= support_min {s}")
    if d.p_inf > 0:
        raise TargetOutOfRange("tilting needs a recurrent law")

    def mean(lam):
        return _tilted_sums(d, lam)[1]

    if d.tail_at_horizon == 0.0:
        m0 = float(np.dot(np.arange(d.horizon + 1), d.pmf))
        if target_mean >= m0 * (1 - 1e-15):
            raise TargetOutOfRange(f"target {target_mean} >= untilted mean {m0}")
    hi = 1.0
    while mean(hi) > target_mean:
        hi *= 2.0
        if hi > 1e6:
            raise NonMonotoneBracket("could not bracket from above")
    lo = min(hi, 1e-3)
    while mean(lo) <= target_mean:
        lo *= 0.5
        if lo < 1e-14:
            raise TargetOutOfRange(f"target {target_mean} not attainable with this horizon")
    m_lo, m_hi = mean(lo), mean(hi)
    if not m_lo > target_mean > m_hi:
        raise NonMonotoneBracket("tilted mean not decreasing on the bracket")
    a, b = math.log(lo), math.log(hi)
    for _ in range(300):
        mid = 0.5 * (a + b)
        m = mean(math.exp(mid))
        if abs(m - target_mean) <= rtol * target_mean:
            a = b = mid
            break
        if m > target_mean:
            a = mid
        else:
            b = mid
    return TiltSolution.at(d, math.exp(0.5 * (a + b)), target_mean)


def tilted_variance_check(t: TiltSolution) -> float:
    """Tilted second moment of a gap."""
    return t.tilted_second_moment


def log_weight(t: TiltSolution, tau, k: int):
    """``log dP/dP~`` of a path with ``k`` gaps summing to ``tau``."""
    return t.lambda_star * np.asarray(tau, dtype=float) + k * t.log_norm


# --- sampling -----------------------------------------------------------------

@dataclass(frozen=True)
class AliasTable:
    prob: np.ndarray
    alias: np.ndarray

    @classmethod
    def build(cls, p) -> "AliasTable":
        """Vose's alias method."""
        p = np.asarray(p, dtype=float)
        K = len(p)
        total = p.sum()
        if not total > 0 or not np.isfinite(total):
            raise ValueError("weights must have a positive finite sum")
        q = (p / total) * K  # normalise first: K / total overflows for subnormal totals
        alias = np.arange(K)
        prob = np.ones(K)
        small = list(np.flatnonzero(q < 1.0))
        large = list(np.flatnonzero(q >= 1.0))
        while small and large:
            s = small.pop()
            l = large.pop()
            prob[s] = q[s]
            alias[s] = l
            q[l] = (q[l] + q[s]) - 1.0
            (small if q[l] < 1.0 else large).append(l)
        return cls(prob, alias)

    def draw(self, u1, u2):
        K = len(self.prob)
        idx = np.minimum((u1 * K).astype(np.int64), K - 1)
        return np.where(u2 < self.prob[idx], idx, self.alias[idx])


@lru_cache(maxsize=16)
def _alias_for(d: InterArrival) -> AliasTable:
    # symbol N+1 .. stands for "beyond the horizon" (tail mass plus defect)
    w = np.concatenate([d.pmf[1:], [d.tail_at_horizon + d.p_inf]])
    return AliasTable.build(w)


def _chunk_size(k: int) -> int:
    c = max(256, (1 << 21) // max(k, 1))
    return 1 << (c.bit_length() - 1)


def _rng(seed: int, chunk: int) -> np.random.Generator:
    # Philox keyed by (seed, chunk id); the counter indexes draws within the chunk
    return np.random.Generator(np.random.Philox(key=(int(chunk) << 64) | (int(seed) & ((1 << 64) - 1))))


@dataclass(frozen=True)
class PathSamples:
    """``tau`` and ``max_gap`` are exact integers (``-1`` where a gap left the horizon)."""

    k: int
    tau: np.ndarray
    max_gap: np.ndarray
    log_tau: np.ndarray
    overflow: np.ndarray

    @property
    def overflow_fraction(self) -> float:
        return float(self.overflow.mean()) if len(self.overflow) else 0.0


def _sample_chunk(d: InterArrival, table: AliasTable, k: int, size: int, seed: int, chunk: int,
                  resolve: bool):
    rng = _rng(seed, chunk)
    u = rng.random((2, size, k))
    sym = table.draw(u[0], u[1]) + 1  # gap value, N + 1 = overflow
    N = d.horizon
    over = sym > N
    path_over = over.any(axis=1)
    gaps = np.where(over, 0, sym)
    tau = gaps.sum(axis=1)
    mx = gaps.max(axis=1)
    with np.errstate(divide="ignore"):
        log_tau = np.log(tau.astype(float))
    if path_over.any():
        log_gap = np.full(over.shape, -np.inf)
        log_gap[~over] = np.log(gaps[~over].astype(float))
        if resolve and d.extension is not None:
            n_over = int(over.sum())
            v = rng.random(n_over)
            w = rng.random(n_over)
            vals = d.extension.sample_log_gap(1.0 - v)
            if d.p_inf > 0:
                frac_inf = d.p_inf / (d.p_inf + d.tail_at_horizon)
                vals = np.where(w < frac_inf, np.inf, vals)
            log_gap[over] = vals
        else:
            log_gap[over] = np.inf
        lt = logsumexp(log_gap[path_over], axis=1)
        log_tau[path_over] = lt
        tau[path_over] = -1
        mx[path_over] = -1
    return tau, mx, log_tau, path_over


def sample_paths(d: InterArrival, k: int, count: int, seed: int, resolve_overflow: bool = True) -> PathSamples:
    """``count`` independent draws of ``(tau_k, M_k)`` by alias sampling.

    Gaps beyond the horizon are recorded as overflow; when the law carries an
    analytic tail, their size is also drawn so that ``log_tau`` stays exact.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    table = _alias_for(d)
    ch = _chunk_size(k)
    sizes = [min(ch, count - i) for i in range(0, count, ch)]

    def job(c):
        return _sample_chunk(d, table, k, sizes[c], seed, c, resolve_overflow)

    with ThreadPoolExecutor(max_workers=n_threads()) as ex:
        parts = list(ex.map(job, range(len(sizes))))
    tau, mx, lt, ov = (np.concatenate([p[i] for p in parts]) for i in range(4))
    return PathSamples(k, tau, mx, lt, ov)


# --- estimators ---------------------------------------------------------------

@dataclass(frozen=True)
class MCEstimate:
    value: float
    std_error: float
    n_samples: int
    seed: int
    method: str  # "plain" or "tilted"
    config_hash: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def config_hash(obj) -> str:
    """SHA-256 of the canonical JSON form (stable under key reordering)."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _mean_se(x: np.ndarray):
    n = len(x)
    m = float(np.sum(x) / n)
    if n < 2:
        return m, 0.0
    var = float(np.sum((x - m) ** 2) / (n - 1))
    return m, math.sqrt(var / n)


def plain_estimate_cdf(d: InterArrival, n: int, k: int, count: int, seed: int) -> MCEstimate:
    s = sample_paths(d, k, count, seed, resolve_overflow=False)
    hit = ((s.tau >= 0) & (s.tau <= n)).astype(float)
    m, se = _mean_se(hit)
    h = config_hash({"op": "plain", "dist": d.spec, "n": n, "k": k, "count": count, "seed": seed})
    return MCEstimate(m, se, count, seed, "plain", h)


def _tilted_chunk(t: TiltSolution, table: AliasTable, N: int, k: int, n: int, size: int, seed: int, chunk: int):
    rng = _rng(seed, chunk)
    u = rng.random((2, size, k))
    sym = table.draw(u[0], u[1]) + 1
    over = (sym > N).any(axis=1)
    tau = np.where(sym > N, 0, sym).sum(axis=1)
    hit = (~over) & (tau <= n)
    lw = log_weight(t, tau, k)
    return np.where(hit, np.exp(np.where(hit, lw, 0.0)), 0.0)


def is_estimate_cdf(d: InterArrival, n: int, k: int, eps: float = 0.1, count: int = 100_000,
                    seed: int = 0, tilt: Optional[TiltSolution] = None) -> MCEstimate:
    """Unbiased importance-sampling estimate of ``P(tau_k <= n)``.

    Gaps are drawn from the law tilted to mean ``(1 - eps) n / k`` and each
    path is reweighted by ``exp(lam tau_k + k log(1 - nu(lam)))``.
    """
    if tilt is None:
        tilt = solve_tilt(d, (1.0 - eps) * n / k)
    w = np.concatenate([tilt.tilted_pmf[1:], [tilt.overflow_mass]])
    table = AliasTable.build(w)
    ch = _chunk_size(k)
    sizes = [min(ch, count - i) for i in range(0, count, ch)]

    def job(c):
        return _tilted_chunk(tilt, table, d.horizon, k, n, sizes[c], seed, c)

    with ThreadPoolExecutor(max_workers=n_threads()) as ex:
        vals = np.concatenate(list(ex.map(job, range(len(sizes)))))
    m, se = _mean_se(vals)
    h = config_hash({"op": "tilted", "dist": d.spec, "n": n, "k": k, "eps": eps, "count": count, "seed": seed})
    return MCEstimate(m, se, count, seed, "tilted", h)


@dataclass(frozen=True)
class DarlingResult:
    y: np.ndarray
    ecdf: np.ndarray
    sup_distance: float
    overflow_fraction: float
    samples: np.ndarray  # k r(tau_k)


def darling_empirical(d: InterArrival, k: int, count: int, seed: int,
                      y_grid: Optional[np.ndarray] = None, max_overflow: float = 1e-3) -> DarlingResult:
    """Empirical law of ``k r(tau_k)`` against ``1 - e^{-y}``.

    ``sup_distance`` is the exact Kolmogorov distance of the sample, with
    ``F(y) = P(k r(tau_k) < y)``.
    """
    s = sample_paths(d, k, count, seed, resolve_overflow=True)
    unresolved = d.extension is None
    if unresolved and s.overflow_fraction > max_overflow:
        raise ExcessOverflow(f"{s.overflow_fraction:.4%} of paths left the horizon")
    r = np.empty(count)
    inside = (~s.overflow) & (s.tau <= d.horizon)
    r[inside] = d.tail_array[s.tau[inside]]
    if (~inside).any():
        if unresolved:
            r[~inside] = np.where(s.overflow[~inside], 0.0, d.tail_array[-1])
        else:
            r[~inside] = d.tail_extended_log(s.log_tau[~inside])
    x = np.sort(k * r)
    # exact sup over the sample: the ECDF of the strict-inequality event jumps after each atom
    target = -np.expm1(-x)
    below = np.searchsorted(x, x, side="left") / count
    upto = np.searchsorted(x, x, side="right") / count
    sup = float(max(np.max(np.abs(below - target)), np.max(np.abs(upto - target))))
    if y_grid is None:
        y_grid = np.linspace(0.0, 8.0, 801)
    ecdf = np.searchsorted(x, y_grid, side="left") / count
    return DarlingResult(np.asarray(y_grid), ecdf, sup, s.overflow_fraction, k * r)
