"""Inter-arrival laws on ``{1, ..., N}`` with an exactly tracked tail.

The regularly varying family is ``f_n = C * phi(n) * n^-(1+alpha)``; the tail
past the horizon is evaluated with a midpoint/Euler-Maclaurin rule on the
continuous density, so ``pmf.sum() + tail_at_horizon + p_inf == 1``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from . import sv_func
from .sv_func import SVFunc


class HorizonExceeded(IndexError):
    pass


class NotNormalizable(ValueError):
    pass


class TailDominates(ArithmeticError):
    pass


class PeriodicDistribution(ValueError):
    pass


# Gauss-Legendre nodes on [0, 1]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def _gl_integrate(fun, a, b):
    """Vectorised 16-point Gauss-Legendre of ``fun`` over each ``[a_i, b_i]``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    w = b - a
    nodes = a[..., None] + w[..., None] * _GL_X
    return (fun(nodes) * _GL_W).sum(axis=-1) * w


def _t_grid(t0: float, t_end: float, first: float = 0.02, growth: float = 1.01) -> np.ndarray:
    n = int(math.ceil(math.log1p((t_end - t0) * (growth - 1.0) / first) / math.log(growth))) + 1
    s = first * (growth ** np.arange(n + 1) - 1.0) / (growth - 1.0)
    return t0 + s


class RegVarExtension:
    """Continuous continuation of ``C phi(x) x^-(1+alpha)`` past the horizon ``N``.

    Works in ``t = log x``, where the mass density is
    ``h(t) = C phi(e^t) e^{-alpha t}``.
    """

    T_MAX = 1e12

    def __init__(self, phi: SVFunc, alpha: float, C: float, N: int):
        self.phi = phi
        self.alpha = float(alpha)
        self.C = float(C)
        self.N = int(N)
        self.t0 = math.log(self.N + 0.5)

    def log_h(self, t):
        return self.phi.log_at_log(t) - self.alpha * np.asarray(t, dtype=float)

    def h(self, t):
        return np.exp(self.log_h(t))

    def log_g(self, x):
        # log of C phi(x) x^-(1+alpha)
        t = np.log(x)
        return math.log(self.C) + self.phi.log_at_log(t) - (1.0 + self.alpha) * t

    def g_prime(self, x):
        t = np.log(x)
        dt = 1e-4
        dphi = (self.phi.log_at_log(t + dt) - self.phi.log_at_log(t - dt)) / (2 * dt)
        return np.exp(self.log_g(x)) * (dphi - (1.0 + self.alpha)) / x

    @cached_property
    def _table(self):
        if self.alpha > 0:
            t_end = min(self.T_MAX, self.t0 + 800.0 / self.alpha)
        else:
            t_end = self.T_MAX
        grid = _t_grid(self.t0, t_end)
        pieces = _gl_integrate(self.h, grid[:-1], grid[1:])
        tail_end = self._tail_beyond(grid[-1])
        cum = np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]]) + tail_end
        return grid, cum, tail_end

    def _local_index(self, t):
        dt = 1e-3
        return (self.log_h(t * (1 + dt)) - self.log_h(t * (1 - dt))) / (math.log1p(dt) - math.log1p(-dt))

    def _tail_beyond(self, t):
        if self.alpha > 0:
            return 0.0
        rho = float(self._local_index(t))
        if rho >= -1.0:
            return math.inf
        return float(t * self.h(t)) / (-rho - 1.0)

    def integral_from_log(self, t):
        """``int_{e^t}^inf C phi(x) x^-(1+alpha) dx`` (vectorised, ``t >= t0``)."""
        grid, cum, tail_end = self._table
        t = np.asarray(t, dtype=float)
        if np.any(t < grid[0] - 1e-12):
            raise HorizonExceeded("tail extension queried inside the horizon")
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        out = np.empty_like(t)
        inside = t < grid[-1]
        if inside.any():
            i = np.searchsorted(grid, t[inside], side="right") - 1
            i = np.clip(i, 0, len(grid) - 2)
            out[inside] = cum[i + 1] + _gl_integrate(self.h, t[inside], grid[i + 1])
        if (~inside).any():
            te = grid[-1]
            if self.alpha > 0:
                out[~inside] = 0.0
            else:
                rho = float(self._local_index(te))
                out[~inside] = tail_end * (t[~inside] / te) ** (rho + 1.0)
        out *= self.C
        return float(out[0]) if scalar else out

    def mass_beyond(self, n):
        """``sum_{j > n} f_j`` for (real) ``n >= N``."""
        x = np.asarray(n, dtype=float) + 0.5
        return self.integral_from_log(np.log(x)) + self.g_prime(x) / 24.0

    def mass_beyond_log(self, log_n):
        """Same as :meth:`mass_beyond` with the argument given as ``log n``."""
        log_n = np.asarray(log_n, dtype=float)
        small = log_n < 700
        out = np.asarray(self.integral_from_log(np.maximum(log_n, self.t0)), dtype=float)
        if np.any(small):
            n = np.exp(np.where(small, log_n, 0.0))
            exact = self.mass_beyond(np.maximum(n, self.N))
            out = np.where(small, exact, out)
        return out if out.ndim else float(out)

    def laplace_beyond(self, lam: float, j: int = 0):
        """``sum_{n > N} n^j f_n e^{-lam n}`` and an error estimate."""
        t1 = max(self.t0 + 1.0, math.log(60.0 / lam)) if lam > 0 else self.T_MAX

        def integrand(t):
            x = np.exp(t)
            return self.C * self.h(t) * x ** j * np.exp(-lam * x)

        grid = _t_grid(self.t0, t1, first=0.01)
        val = float(_gl_integrate(integrand, grid[:-1], grid[1:]).sum())
        x0 = self.N + 0.5
        # next Euler-Maclaurin term, with the integrand's log-derivative bounded by (1+alpha+j)/x + lam
        slope = (1.0 + self.alpha + j) / x0 + lam
        g0 = float(np.exp(self.log_g(x0))) * x0 ** j * math.exp(-lam * x0)
        err = g0 * slope / 24.0 + 1e-13 * abs(val)
        return val, err

    def sample_log_gap(self, v):
        """Inverse-transform draw of ``log G`` given ``G > N``; ``v`` uniform on (0, 1]."""
        grid, cum, tail_end = self._table
        v = np.asarray(v, dtype=float)
        target = v * cum[0]
        out = np.empty_like(target)
        inside = target > cum[-1]
        if inside.any():
            p = target[inside]
            i = np.searchsorted(-cum, -p, side="left") - 1
            i = np.clip(i, 0, len(grid) - 2)
            t = grid[i].copy()
            hi = grid[i + 1]
            for _ in range(40):
                resid = self.integral_from_log(t) / self.C - p
                step = resid / self.h(t)
                t_new = np.clip(t + step, grid[i], hi)
                if np.all(np.abs(t_new - t) <= 1e-13 * np.maximum(1.0, np.abs(t))):
                    t = t_new
                    break
                t = t_new
            out[inside] = t
        if (~inside).any():
            te = grid[-1]
            rho = float(self._local_index(te))
            out[~inside] = te * (target[~inside] / tail_end) ** (1.0 / (rho + 1.0))
        # discrete gap G = ceil(x - 1/2)
        x = np.exp(np.minimum(out, 700.0))
        exact = out < 34.0
        gap = np.maximum(np.ceil(x - 0.5), self.N + 1)
        return np.where(exact, np.log(gap), out)


class ScaledExtension:
    """Extension of a law obtained by scaling mass and/or gap length of a base law."""

    def __init__(self, base, mass_factor: float = 1.0, gap_factor: int = 1):
        self.base = base
        self.mass_factor = float(mass_factor)
        self.gap_factor = int(gap_factor)
        self.N = base.N * self.gap_factor

    def mass_beyond(self, n):
        n = np.floor(np.asarray(n, dtype=float) / self.gap_factor)
        return self.mass_factor * self.base.mass_beyond(np.maximum(n, self.base.N))

    def mass_beyond_log(self, log_n):
        return self.mass_factor * self.base.mass_beyond_log(np.asarray(log_n) - math.log(self.gap_factor))

    def laplace_beyond(self, lam: float, j: int = 0):
        val, err = self.base.laplace_beyond(lam * self.gap_factor, j)
        s = self.mass_factor * self.gap_factor ** j
        return s * val, s * err

    def sample_log_gap(self, v):
        return self.base.sample_log_gap(v) + math.log(self.gap_factor)


@dataclass(frozen=True)
class LaplacePair:
    lam: float
    nu: float
    nu_prime: float
    nu_err: float = 0.0
    nu_prime_err: float = 0.0


@dataclass(eq=False)
class InterArrival:
    """Gap law ``f_1..f_N`` plus tail mass past ``N`` and a defect at infinity.

    ``pmf[0]`` is always 0 so that ``pmf[n] = P(tau_1 = n)``.
    """

    pmf: np.ndarray
    tail_at_horizon: float = 0.0
    p_inf: float = 0.0
    tail_err: float = 0.0
    alpha: Optional[float] = None
    phi: Optional[SVFunc] = None
    norm_const: float = 1.0
    family: str = "explicit"
    spec: dict = field(default_factory=dict)
    extension: object = None

    def __post_init__(self):
        pmf = np.asarray(self.pmf, dtype=float)
        if pmf.ndim != 1 or len(pmf) < 2:
            raise ValueError("pmf must be a 1-d array indexed 0..N")
        if pmf[0] != 0.0:
            raise ValueError("pmf[0] must be 0 (gaps are >= 1)")
        if np.any(pmf < 0):
            raise ValueError("negative pmf entry")
        pmf.setflags(write=False)
        self.pmf = pmf
        suffix = np.concatenate([np.cumsum(pmf[::-1])[::-1][1:], [0.0]])
        # _r[n] = P(tau_1 > n), n = 0..N
        self._r = self.p_inf + self.tail_at_horizon + suffix
        n = np.arange(len(pmf), dtype=float)
        self._m1 = np.cumsum(n * pmf)
        self._m2 = np.cumsum(n * n * pmf)
        self._F = np.cumsum(pmf)

    @property
    def horizon(self) -> int:
        return len(self.pmf) - 1

    @property
    def support_min(self) -> int:
        nz = np.flatnonzero(self.pmf)
        return int(nz[0]) if len(nz) else 0

    @property
    def recurrent(self) -> bool:
        return self.p_inf == 0.0

    def mass_error(self) -> float:
        return abs(math.fsum(self.pmf) + self.tail_at_horizon + self.p_inf - 1.0)

    @property
    def tail_array(self) -> np.ndarray:
        return self._r

    def phi_eff(self, x):
        """``x^{1+alpha} f_x`` continued through the SV metadata (includes the normalising constant)."""
        if self.phi is None or self.alpha is None:
            raise ValueError("distribution has no slowly varying metadata")
        return self.norm_const * self.phi(x)

    @cached_property
    def phi_eff_sv(self) -> SVFunc:
        if self.phi is None:
            raise ValueError("distribution has no slowly varying metadata")
        return sv_func.Product((sv_func.Const(self.norm_const), self.phi))

    def mean_truncated(self, m: int) -> float:
        return truncated_moment(self, m, 1)

    def tail_extended(self, x: float) -> float:
        """``P(tau_1 > x)`` for any real ``x``, using the analytic continuation past ``N``."""
        if x <= self.horizon:
            return float(self._r[int(math.floor(x))])
        if self.extension is None:
            raise HorizonExceeded(f"x={x} beyond horizon {self.horizon} and no tail model")
        return self.p_inf + float(self.extension.mass_beyond(math.floor(x)))

    def tail_extended_log(self, log_x):
        """Vectorised ``P(tau_1 > e^{log_x})``; handles arguments far past float range."""
        log_x = np.asarray(log_x, dtype=float)
        out = np.empty_like(log_x, dtype=float)
        within = log_x <= math.log(self.horizon + 1)
        if within.any():
            n = np.floor(np.exp(log_x[within]) * (1 + 1e-15)).astype(np.int64)
            out[within] = self._r[np.minimum(n, self.horizon)]
        if (~within).any():
            if self.extension is None:
                raise HorizonExceeded("no tail model past the horizon")
            out[~within] = self.p_inf + self.extension.mass_beyond_log(log_x[~within])
        return out


def tail(d: InterArrival, n: int, clamp: bool = False) -> float:
    if n < 0:
        return 1.0
    if n > d.horizon:
        if not clamp:
            raise HorizonExceeded(f"n={n} > horizon {d.horizon}")
        n = d.horizon
    return float(d._r[n])


def truncated_moment(d: InterArrival, m: int, j: int = 1) -> float:
    """``E[tau_1^j ; tau_1 <= m]``."""
    if m > d.horizon:
        raise HorizonExceeded(f"m={m} > horizon {d.horizon}")
    if m < 1:
        return 0.0
    if j == 1:
        return float(d._m1[m])
    if j == 2:
        return float(d._m2[m])
    if j == 0:
        return float(d._F[m])
    raise ValueError("j must be 0, 1 or 2")


def laplace(d: InterArrival, lam: float, strict: bool = True) -> LaplacePair:
    """``nu(lam) = 1 - E exp(-lam tau_1)`` and ``nu'(lam)``.

    Summation is done as ``p_inf + sum f_n (1 - e^{-lam n}) + ...`` to avoid the
    cancellation of ``1 - E[...]`` at small ``lam``.
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    N = d.horizon
    n = np.arange(N + 1, dtype=float)
    decay = np.exp(-lam * n)
    head_nu = math.fsum(d.pmf * -np.expm1(-lam * n))
    head_np = math.fsum(n * d.pmf * decay)
    if d.tail_at_horizon == 0.0:
        b0 = b1 = e0 = e1 = 0.0
    elif d.extension is not None:
        b0, e0 = d.extension.laplace_beyond(lam, 0)
        b1, e1 = d.extension.laplace_beyond(lam, 1)
        e0 += d.tail_err
    else:
        # only the crude interval [0, tail * e^{-lam(N+1)}] is available
        hi = d.tail_at_horizon * math.exp(-lam * (N + 1))
        b0, e0 = 0.5 * hi, 0.5 * hi
        # max of n e^{-lam n} over n > N
        peak = (N + 1) * math.exp(-lam * (N + 1)) if lam * (N + 1) >= 1 else 1.0 / (lam * math.e)
        hi1 = d.tail_at_horizon * peak
        b1, e1 = 0.5 * hi1, 0.5 * hi1
    nu = d.p_inf + head_nu + d.tail_at_horizon - b0
    nu_p = head_np + b1
    if strict and (e0 > 1e-8 * nu or e1 > 1e-8 * nu_p):
        raise TailDominates(f"horizon correction too large at lam={lam:g}")
    return LaplacePair(lam, nu, nu_p, e0, e1)


def _normalisation(phi: SVFunc, alpha: float, support_min: int, N: int):
    n = np.arange(support_min, N + 1, dtype=float)
    t = np.log(n)
    g = np.exp(phi.log_at_log(t) - (1.0 + alpha) * t)
    ext = RegVarExtension(phi, alpha, 1.0, N)
    if alpha == 0.0:
        rho = float(ext._local_index(RegVarExtension.T_MAX))
        if not rho < -1.0 - 1e-9:
            raise NotNormalizable(f"sum phi(n)/n diverges (tail index {rho:.4f} >= -1)")
    x = N + 0.5
    rem = float(ext.integral_from_log(math.log(x))) + float(ext.g_prime(x)) / 24.0
    g3 = float(np.exp(ext.log_g(x))) * (1 + alpha) * (2 + alpha) * (3 + alpha) / x ** 3
    err = 2.0 * 7.0 / 5760.0 * g3 + 1e-13 * rem
    return g, rem, err


def build_regvar(alpha: float, phi: SVFunc, support_min: int = 1, N: int = 100_000) -> InterArrival:
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if support_min < 1:
        raise ValueError("support_min must be >= 1")
    if N < 10 * support_min:
        raise ValueError("horizon must be at least 10 * support_min")
    g, rem, err = _normalisation(phi, float(alpha), support_min, N)
    total = math.fsum(g) + rem
    C = 1.0 / total
    pmf = np.zeros(N + 1)
    pmf[support_min:] = C * g
    spec = {"family": "regvar", "alpha": float(alpha), "phi": phi.to_dict(),
            "support_min": support_min, "horizon": N}
    return InterArrival(pmf, tail_at_horizon=C * rem, tail_err=C * err, alpha=float(alpha),
                        phi=phi, norm_const=C, family="regvar", spec=spec,
                        extension=RegVarExtension(phi, alpha, C, N))


def build_defective(base: InterArrival, p_inf: float) -> InterArrival:
    if not base.recurrent:
        raise ValueError("base must be recurrent")
    if not 0.0 < p_inf < 1.0:
        raise ValueError("p_inf must lie in (0, 1)")
    q = 1.0 - p_inf
    ext = ScaledExtension(base.extension, mass_factor=q) if base.extension is not None else None
    spec = {"family": "defective", "p_inf": p_inf, "base": base.spec}
    return InterArrival(base.pmf * q, tail_at_horizon=q * base.tail_at_horizon, p_inf=p_inf,
                        tail_err=q * base.tail_err, alpha=base.alpha, phi=base.phi,
                        norm_const=q * base.norm_const, family="defective", spec=spec, extension=ext)


def build_interleaved(sigma: InterArrival) -> InterArrival:
    """``tau_1 = 1`` or ``2 sigma_1`` with probability 1/2 each."""
    if not sigma.recurrent or sigma.alpha != 0.0:
        raise ValueError("sigma must be recurrent with alpha = 0")
    Ns = sigma.horizon
    pmf = np.zeros(2 * Ns + 1)
    pmf[1] = 0.5
    pmf[2::2] += 0.5 * sigma.pmf[1:]
    ext = ScaledExtension(sigma.extension, 0.5, 2) if sigma.extension is not None else None
    spec = {"family": "interleaved", "sigma": sigma.spec}
    return InterArrival(pmf, tail_at_horizon=0.5 * sigma.tail_at_horizon, tail_err=0.5 * sigma.tail_err,
                        alpha=0.0, phi=None, family="interleaved", spec=spec, extension=ext)


def build_explicit(pmf, check_aperiodic: bool = True) -> InterArrival:
    """Finite pmf given for gaps ``1, 2, ...``; any missing mass is a defect at infinity."""
    f = np.concatenate([[0.0], np.asarray(pmf, dtype=float)])
    total = math.fsum(f)
    if total > 1.0 + 1e-12:
        raise ValueError("pmf sums to more than 1")
    if check_aperiodic:
        support = np.flatnonzero(f)
        if len(support) == 0:
            raise ValueError("empty support")
        if math.gcd(*map(int, support)) != 1:
            raise PeriodicDistribution("gap law is periodic; only aperiodic laws are supported")
    p_inf = max(0.0, 1.0 - total)
    if p_inf < 1e-14:
        p_inf = 0.0
    return InterArrival(f, p_inf=p_inf, family="explicit", spec={"family": "explicit", "pmf": list(map(float, pmf))})


def delta_one(N: int = 1) -> InterArrival:
    return build_explicit([1.0] + [0.0] * (N - 1))


def uniform_12(N: int = 2) -> InterArrival:
    return build_explicit([0.5, 0.5] + [0.0] * (N - 2))


def d0(N: int = 100_000) -> InterArrival:
    """The canonical index-0 law ``f_n = C / (n log^2(n + e))``."""
    return build_regvar(0.0, sv_func.LogPow(-2.0), 1, N)


def ssrw_z2(N: int = 100_000) -> InterArrival:
    """Asymptotic family of planar SSRW return times: ``f_n = pi / (n log^2(n + e))`` exactly for
    ``n >= n0``, with the leftover mass spread over ``1..n0-1`` in the same shape.

    ``n0`` is the first point where the pi-scaled tail fits under total mass 1, so
    ``P(tau_1 > n) ~ pi / log n`` keeps the walk's constant (plain normalisation would
    reduce this law to :func:`d0`).
    """
    base = d0(N)
    C = base.norm_const
    unit_tail = base.tail_array / C  # sum_{j > n} 1 / (j log^2(j + e))
    n0 = int(np.argmax(math.pi * unit_tail <= 1.0)) + 1
    if 10 * n0 > N:
        raise ValueError(f"horizon must be at least {10 * n0} for ssrw_z2")
    pmf = np.zeros(N + 1)
    pmf[n0:] = math.pi * (base.pmf[n0:] / C)
    head = base.pmf[1:n0]
    pmf[1:n0] = head * ((1.0 - math.pi * unit_tail[n0 - 1]) / math.fsum(head))
    s = math.pi / C
    spec = {"family": "named", "name": "ssrw_z2", "horizon": N}
    return InterArrival(pmf, tail_at_horizon=s * base.tail_at_horizon, tail_err=s * base.tail_err,
                        alpha=0.0, phi=base.phi, norm_const=math.pi, family="regvar", spec=spec,
                        extension=ScaledExtension(base.extension, mass_factor=s))


def from_spec(spec: dict) -> InterArrival:
    fam = spec["family"]
    if fam == "regvar":
        return build_regvar(float(spec["alpha"]), sv_func.from_dict(spec["phi"]),
                            int(spec.get("support_min", 1)), int(spec.get("horizon", 100_000)))
    if fam == "defective":
        return build_defective(from_spec(spec["base"]), float(spec["p_inf"]))
    if fam == "interleaved":
        return build_interleaved(from_spec(spec["sigma"]))
    if fam == "explicit":
        return build_explicit(spec["pmf"])
    if fam == "named":
        name = spec["name"]
        N = int(spec.get("horizon", 100_000))
        table = {"d0": d0, "ssrw_z2": ssrw_z2, "delta1": delta_one, "uniform12": uniform_12}
        if name not in table:
            raise ValueError(f"unknown named distribution {name!r}")
        return table[name](N)
    raise ValueError(f"unknown family {fam!r}")


def from_json(s: str) -> InterArrival:
    return from_spec(json.loads(s))
