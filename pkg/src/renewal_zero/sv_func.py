"""Slowly varying functions built from a small set of combinators.

Every node evaluates on ``x >= x_min`` (smaller arguments are clamped) and can
also be evaluated *in log space*, i.e. ``log phi(e^t)``, which is what the tail
integrals need once ``x`` is far beyond floating point range.

JSON schema (one object per node)::

    {"kind": "const", "c": 3.0}
    {"kind": "logpow", "a": -2.0}            # (log(x + e))^a
    {"kind": "loglogpow", "a": 1.0}          # (log(e + log(x + e)))^a
    {"kind": "product", "factors": [ ... ]}
    {"kind": "power", "base": { ... }, "p": 0.5}

Any node may carry an optional ``"x_min"`` (default 1.0).
"""
from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

E = math.e


class BelowMonotoneThreshold(ValueError):
    """Raised when the conjugate is queried where y -> y*phi(y) is not yet monotone."""


class SVFunc:
    """Base class of the combinator tree."""

    x_min: float = 1.0

    def log_at_log(self, t):
        """Return ``log phi(e^t)`` (vectorised over ``t``)."""
        raise NotImplementedError

    def value(self, x):
        """Direct evaluation on already clamped ``x``."""
        raise NotImplementedError

    def __call__(self, x):
        x = np.maximum(np.asarray(x, dtype=float), self.x_min)
        out = np.asarray(self.value(x), dtype=float)
        return float(out) if out.ndim == 0 else out

    def to_dict(self) -> dict:
        raise NotImplementedError

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def __mul__(self, other: "SVFunc") -> "Product":
        return Product((self, other))

    def _clamp_t(self, t):
        return np.maximum(np.asarray(t, dtype=float), math.log(self.x_min))


def _log_x_plus_e(t):
    # log(e^t + e) without overflow for large t
    t = np.asarray(t, dtype=float)
    return np.logaddexp(t, 1.0)


@dataclass(frozen=True)
class Const(SVFunc):
    c: float
    x_min: float = 1.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("Const requires c > 0")

    def log_at_log(self, t):
        t = np.asarray(t, dtype=float)
        return np.full_like(t, math.log(self.c))

    def value(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.c)

    def to_dict(self):
        return _with_floor({"kind": "const", "c": self.c}, self.x_min)


@dataclass(frozen=True)
class LogPow(SVFunc):
    a: float
    x_min: float = 1.0

    def log_at_log(self, t):
        return self.a * np.log(_log_x_plus_e(self._clamp_t(t)))

    def value(self, x):
        return np.log(np.maximum(x, self.x_min) + E) ** self.a

    def to_dict(self):
        return _with_floor({"kind": "logpow", "a": self.a}, self.x_min)


@dataclass(frozen=True)
class LogLogPow(SVFunc):
    a: float
    x_min: float = 1.0

    def log_at_log(self, t):
        inner = _log_x_plus_e(self._clamp_t(t))
        return self.a * np.log(inner + E)

    def value(self, x):
        return np.log(E + np.log(np.maximum(x, self.x_min) + E)) ** self.a

    def to_dict(self):
        return _with_floor({"kind": "loglogpow", "a": self.a}, self.x_min)


@dataclass(frozen=True)
class Product(SVFunc):
    factors: tuple
    x_min: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if not self.factors:
            raise ValueError("Product needs at least one factor")

    def log_at_log(self, t):
        t = self._clamp_t(t)
        return sum(f.log_at_log(t) for f in self.factors)

    def value(self, x):
        x = np.maximum(x, self.x_min)
        out = self.factors[0](x)
        for f in self.factors[1:]:
            out = out * f(x)
        return out

    def to_dict(self):
        return _with_floor({"kind": "product", "factors": [f.to_dict() for f in self.factors]}, self.x_min)


@dataclass(frozen=True)
class Power(SVFunc):
    base: SVFunc
    p: float
    x_min: float = 1.0

    def log_at_log(self, t):
        return self.p * self.base.log_at_log(self._clamp_t(t))

    def value(self, x):
        return self.base(np.maximum(x, self.x_min)) ** self.p

    def to_dict(self):
        return _with_floor({"kind": "power", "base": self.base.to_dict(), "p": self.p}, self.x_min)


def _with_floor(d: dict, x_min: float) -> dict:
    if x_min != 1.0:
        d["x_min"] = x_min
    return d


def sv_eval(f: SVFunc, x: float) -> float:
    return float(f(x))


def from_dict(d: dict) -> SVFunc:
    kind = d["kind"]
    x_min = float(d.get("x_min", 1.0))
    if x_min < 1.0:
        raise ValueError("x_min must be >= 1")
    if kind == "const":
        return Const(float(d["c"]), x_min)
    if kind == "logpow":
        return LogPow(float(d["a"]), x_min)
    if kind == "loglogpow":
        return LogLogPow(float(d["a"]), x_min)
    if kind == "product":
        return Product(tuple(from_dict(f) for f in d["factors"]), x_min)
    if kind == "power":
        return Power(from_dict(d["base"]), float(d["p"]), x_min)
    raise ValueError(f"unknown SVFunc kind {kind!r}")


def from_json(s: str) -> SVFunc:
    return from_dict(json.loads(s))


def karamata_ratios(f: SVFunc, lam: float, exponents: Sequence[int] = range(2, 9)) -> np.ndarray:
    """``|f(lam * 10^j) / f(10^j) - 1|`` along the given exponents."""
    t = np.array([j * math.log(10.0) for j in exponents])
    return np.abs(np.expm1(f.log_at_log(t + math.log(lam)) - f.log_at_log(t)))


@dataclass
class ConjugateSV:
    """Pointwise conjugate ``phi*`` of a slowly varying ``phi``.

    ``x * phi*(x)`` is the solution ``y`` of ``y * phi(y) = x``, found by
    bisection in ``log y`` once ``y -> y phi(y)`` is monotone.
    """

    base: SVFunc
    bracket_growth: float = 2.0
    rtol: float = 1e-10
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: Any = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        self.y_threshold, self.x_threshold = self._monotone_threshold()

    def _log_h(self, log_y):
        return log_y + float(self.base.log_at_log(log_y))

    def _monotone_threshold(self, run: int = 8, max_octaves: int = 400):
        # scan octaves y = 2^i until `run` consecutive increases of y*phi(y)
        log2 = math.log(2.0)
        start = 0
        prev = self._log_h(0.0)
        streak = 0
        for i in range(1, max_octaves):
            cur = self._log_h(i * log2)
            if cur > prev:
                streak += 1
                if streak >= run:
                    y0 = start * log2
                    return math.exp(y0), math.exp(self._log_h(y0))
            else:
                streak = 0
                start = i
            prev = cur
        raise BelowMonotoneThreshold("y*phi(y) never became increasing")

    def solve_log_y(self, log_x: float) -> float:
        """``log y`` with ``y phi(y) = e^{log_x}``."""
        lo = math.log(self.y_threshold)
        if log_x < self._log_h(lo) - 1e-14:
            raise BelowMonotoneThreshold(
                f"x={math.exp(log_x):.6g} below monotonicity threshold {self.x_threshold:.6g}"
            )
        step = math.log(self.bracket_growth)
        hi = max(lo, log_x) + step
        while self._log_h(hi) < log_x:
            lo = hi
            hi += step
            step *= 2.0
        tol = math.log1p(self.rtol)
        for _ in range(400):
            mid = 0.5 * (lo + hi)
            val = self._log_h(mid)
            if abs(val - log_x) <= tol:
                return mid
            if val < log_x:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def __call__(self, x: float) -> float:
        return sv_conjugate_eval(self, x)

    def inverse(self, x: float) -> float:
        """``y = x * phi*(x)``."""
        return x * self(x)


def sv_conjugate_eval(c: ConjugateSV, x: float) -> float:
    x = float(x)
    hit = c._cache.get(x)
    if hit is not None:
        return hit
    log_y = c.solve_log_y(math.log(x))
    val = math.exp(log_y - math.log(x))
    with c._lock:
        c._cache[x] = val
    return val
