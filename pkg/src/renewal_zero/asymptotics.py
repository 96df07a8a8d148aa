"""Closed-form predictors for the limit theorems and the explicit bound constants."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .interarrival import HorizonExceeded, InterArrival, RegVarExtension, tail, truncated_moment
from .renewal_exact import RenewalTable, log_cdf
from .sv_func import ConjugateSV


class RegimeUnknown(ValueError):
    pass


class Regime(enum.Enum):
    TRANSIENT = "transient"
    FINITE_MEAN = "finite-mean"
    ALPHA_ONE = "alpha-one"
    ALPHA_IN_01 = "alpha-in-01"
    ALPHA_ZERO = "alpha-zero"


def _phi_sum_converges(d: InterArrival) -> bool:
    ext = RegVarExtension(d.phi, 0.0, 1.0, d.horizon)
    return float(ext._local_index(RegVarExtension.T_MAX)) < -1.0 - 1e-9


def resolve_regime(d: InterArrival) -> Regime:
    if d.p_inf > 0:
        return Regime.TRANSIENT
    if d.alpha is None:
        if d.tail_at_horizon == 0.0:
            return Regime.FINITE_MEAN
        raise RegimeUnknown("explicit law with mass past the horizon carries no regime metadata")
    a = d.alpha
    if a == 0.0:
        return Regime.ALPHA_ZERO
    if 0.0 < a < 1.0:
        return Regime.ALPHA_IN_01
    if a == 1.0 and d.phi is not None and not _phi_sum_converges(d):
        return Regime.ALPHA_ONE
    return Regime.FINITE_MEAN


def mean_gap(d: InterArrival) -> float:
    """``E[tau_1]`` (finite-mean regime only)."""
    head = truncated_moment(d, d.horizon, 1)
    if d.tail_at_horizon == 0.0:
        return head
    # sum_{n>N} n f_n = C sum phi(n) n^{-alpha}: the same tail machinery with alpha - 1
    ext = RegVarExtension(d.phi, d.alpha - 1.0, d.norm_const, d.horizon)
    return head + float(ext.mass_beyond(d.horizon))


def mean_min(d: InterArrival, n: int) -> float:
    """``E[tau_1 ^ n] = sum_{j<n} P(tau_1 > j)``."""
    if n > d.horizon + 1:
        raise HorizonExceeded(f"n={n} beyond horizon")
    return math.fsum(d.tail_array[:n])


def predict_renewal_mass(d: InterArrival, n: int) -> float:
    regime = resolve_regime(d)
    if regime is Regime.TRANSIENT:
        return float(d.pmf[n]) / d.p_inf ** 2
    if regime is Regime.FINITE_MEAN:
        return 1.0 / mean_gap(d)
    if regime is Regime.ALPHA_ONE:
        return 1.0 / mean_min(d, n)
    if regime is Regime.ALPHA_IN_01:
        a = d.alpha
        return a * math.sin(math.pi * a) / math.pi * n ** (-(1.0 - a)) / float(d.phi_eff(n))
    r = tail(d, n)
    return float(d.pmf[n]) / (r * r)


def doney_prefactor(alpha: float) -> float:
    return alpha * math.sin(math.pi * alpha) / math.pi


def _require_alpha_zero(d: InterArrival):
    if d.p_inf > 0 or d.alpha != 0.0:
        raise RegimeUnknown("predictor defined for the recurrent alpha = 0 regime only")


def log_predict_local_pmf(d: InterArrival, k: int, n: int) -> float:
    _require_alpha_zero(d)
    if k < 1:
        raise ValueError("k >= 1 required")
    f = float(d.pmf[n])
    if f <= 0:
        return -math.inf
    return math.log(k) + math.log(f) + k * math.log1p(-tail(d, n))


def predict_local_pmf(d: InterArrival, k: int, n: int) -> float:
    """``k f_n (1 - r_n)^k``."""
    return math.exp(log_predict_local_pmf(d, k, n))


def darling_cdf(y):
    y = np.asarray(y, dtype=float)
    out = -np.expm1(-np.maximum(y, 0.0))
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=32)
def _conjugate(d: InterArrival) -> ConjugateSV:
    return ConjugateSV(d.phi_eff_sv)


def conjugate_for(d: InterArrival) -> ConjugateSV:
    """Conjugate of the effective ``phi`` (normalising constant included)."""
    _require_alpha_zero(d)
    return _conjugate(d)


def ld_rate(d: InterArrival, n: int, k: int) -> float:
    """``k r((n/k) phi*(n/k))``; the tail is continued past the horizon when needed."""
    conj = conjugate_for(d)
    x = n / k
    y = x * conj(x)
    return k * d.tail_extended(y)


def rate_function_asymptote(d: InterArrival, b: float) -> float:
    """``r(b phi*(b))``, the large-``b`` behaviour of the rate function."""
    conj = conjugate_for(d)
    return d.tail_extended(b * conj(b))


def rate_function_estimate(d: InterArrival, b: int, k: int) -> float:
    """Finite-size value of ``-(1/k) log P(tau_k <= b k)``."""
    return -log_cdf(d, k, b * k) / k


def extdarling_lower_const(M: float) -> float:
    if not M > 0:
        raise ValueError("M must be positive")
    if M <= 1.0 / 3.0:
        return 1.0 - 2.0 * M
    return 0.5 * (1.0 / (4.0 * M)) ** (2.0 * M)


def fuk_nagaev_c5(d: InterArrival, m: int) -> float:
    """``max_{j<=m} E[tau_1 | tau_1 <= j] / (j phi(j))``."""
    j = np.arange(1, m + 1)
    F = np.cumsum(d.pmf[: m + 1])[1:]
    m1 = np.cumsum(np.arange(m + 1) * d.pmf[: m + 1])[1:]
    ok = F > 0
    cond = m1[ok] / F[ok]
    return float(np.max(cond / (j[ok] * d.phi_eff(j[ok].astype(float)))))


def fuk_nagaev_bound(d: InterArrival, k: int, m: int, n: int) -> float:
    """``min(1, (c5 e^2 k m phi(m) / n)^{n / 2m})``."""
    if not 1 <= m <= n:
        raise ValueError("need 1 <= m <= n")
    if k <= 0:
        return 0.0
    c5 = fuk_nagaev_c5(d, m)
    base = c5 * math.e ** 2 * k * m * float(d.phi_eff(m)) / n
    if base >= 1.0:
        return 1.0
    return math.exp(n / (2.0 * m) * math.log(base))


def reverse_avg_pair(d: InterArrival, u: RenewalTable, n: int, eps: float) -> tuple[float, float]:
    """Window average of ``f`` just below ``n`` against ``r(n)^2 u_n``.

    The window is ``(n - L, n]`` with ``L = floor(eps n)``.
    """
    L = int(math.floor(eps * n))
    if L < 1:
        raise ValueError("eps * n must be >= 1")
    if n > d.horizon or n > u.horizon:
        raise HorizonExceeded(f"n={n} beyond horizon")
    lhs = math.fsum(d.pmf[n - L + 1: n + 1]) / L
    r = tail(d, n)
    return lhs, r * r * float(u.u[n])


@dataclass(frozen=True)
class SlowVariationReport:
    grid: tuple
    ratio_dev: tuple  # |U(2n)/U(n) - 1|
    u_times_r: tuple  # U_n r(n)
    slowly_varying: bool
    tail_product_trend: bool


def slow_variation_check_U(u: RenewalTable, d: InterArrival | None = None, lam: int = 2,
                           tol: float = 0.25) -> SlowVariationReport:
    """Karamata ratio test on ``U_n`` along ``n = 10^j`` and the ``U_n r(n) -> 1`` trend."""
    N = u.horizon
    grid = [10 ** j for j in range(1, 12) if lam * 10 ** j <= N]
    dev = [abs(u.U[lam * n] / u.U[n] - 1.0) for n in grid]
    sv = all(b <= a for a, b in zip(dev, dev[1:])) and dev[-1] < tol
    prod, trend = (), False
    if d is not None:
        prod = tuple(float(u.U[n]) * tail(d, n) for n in grid)
        errs = [abs(p - 1.0) for p in prod]
        trend = all(b <= a + 1e-15 for a, b in zip(errs, errs[1:]))
    return SlowVariationReport(tuple(grid), tuple(dev), prod, sv, trend)
