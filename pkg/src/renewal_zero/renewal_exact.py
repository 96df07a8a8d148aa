"""Exact finite-horizon laws computed by convolution dynamic programming."""
from __future__ import annotations

import io
import math
import struct
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.fft
import scipy.linalg

from .interarrival import HorizonExceeded, InterArrival, TailDominates

# N * m below which np.convolve (direct, entrywise relative accuracy) is used
DIRECT_CONV_LIMIT = 1 << 23
# block size of the online (CDQ) solver below which a triangular solve is used
BLOCK = 128


class InvalidTruncation(ValueError):
    pass


class ZeroDenominator(ZeroDivisionError):
    pass


class NegativePmfWarning(RuntimeWarning):
    pass


@dataclass(eq=False)
class RenewalTable:
    """``u[n] = P(n in tau)`` for ``n = 0..N`` and prefix sums ``U``."""

    u: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.U = np.cumsum(self.u)

    @property
    def horizon(self) -> int:
        return len(self.u) - 1


def _fft_conv(a: np.ndarray, b: np.ndarray, n_out: int) -> np.ndarray:
    size = scipy.fft.next_fast_len(len(a) + len(b) - 1, real=True)
    out = scipy.fft.irfft(scipy.fft.rfft(a, size) * scipy.fft.rfft(b, size), size)
    return out[:n_out]


def _online_solve(b: np.ndarray, kern: np.ndarray, method: str) -> np.ndarray:
    """Solve ``x[n] = b[n] + sum_{0<=j<n} x[j] kern[n-j]`` for ``n = 0..len(b)-1``."""
    L = len(b)
    x = np.zeros(L)
    kern = np.asarray(kern, dtype=float)
    if method == "direct":
        kr = kern[::-1].copy()  # kr[i] = kern[L-1-i]
        x[0] = b[0]
        for n in range(1, L):
            # sum_j x[j] kern[n-j], j = 0..n-1  ->  kern index n..1
            x[n] = b[n] + np.dot(kr[L - 1 - n: L - 1], x[:n])
        return x
    if method != "fft":
        raise ValueError(f"unknown method {method!r}")
    acc = np.array(b, dtype=float)

    def solve(lo: int, hi: int):
        if hi - lo <= BLOCK:
            m = hi - lo
            idx = np.arange(m)
            diff = idx[:, None] - idx[None, :]
            T = np.where(diff > 0, kern[np.clip(diff, 0, m - 1)], 0.0)
            x[lo:hi] = scipy.linalg.solve_triangular(np.eye(m) - T, acc[lo:hi], lower=True,
                                                     unit_diagonal=True, check_finite=False)
            return
        mid = (lo + hi) // 2
        solve(lo, mid)
        # contributions of x[lo:mid] to acc[mid:hi]
        c = _fft_conv(x[lo:mid], kern[: hi - lo], hi - lo)
        acc[mid:hi] += c[mid - lo: hi - lo]
        solve(mid, hi)

    solve(0, L)
    return x


def renewal_mass(d: InterArrival, N: Optional[int] = None, method: str = "auto") -> RenewalTable:
    """``u_0 = 1``, ``u_n = sum_{j=1}^n f_j u_{n-j}``."""
    if N is None:
        N = d.horizon
    if N > d.horizon:
        raise HorizonExceeded(f"N={N} > horizon {d.horizon}")
    if method == "auto":
        method = "direct" if N <= 4096 else "fft"
    b = np.zeros(N + 1)
    b[0] = 1.0
    kern = np.array(d.pmf[: N + 1])
    return RenewalTable(_online_solve(b, kern, method))


def recursion_residual(d: InterArrival, table: RenewalTable) -> float:
    """``max_n |u_n - sum_j f_j u_{n-j}|`` recomputed with a direct convolution."""
    u = table.u
    N = table.horizon
    conv = np.convolve(d.pmf[: N + 1], u)[: N + 1]
    return float(np.max(np.abs(u[1:] - conv[1:]))) if N > 0 else 0.0


def invert_renewal(u: RenewalTable, method: str = "auto") -> np.ndarray:
    """Recover ``f`` from ``u`` through ``u(s)(1 - f(s)) = 1``; ``f[0] = 0``."""
    uu = u.u
    if uu[0] != 1.0:
        raise ValueError("u_0 must be 1")
    if method == "auto":
        method = "direct" if len(uu) <= 4097 else "fft"
    b = np.array(uu, dtype=float)
    b[0] = 0.0
    f = _online_solve(b, -uu, method)
    f[0] = 0.0
    if np.any(f < -1e-9):
        warnings.warn("inverted pmf has entries below -1e-9; input is not a renewal mass function",
                      NegativePmfWarning, stacklevel=2)
    return f


def intersect_renewals(ua: RenewalTable, ub: RenewalTable) -> RenewalTable:
    """Renewal mass of the intersection of two independent renewals."""
    if ua.horizon != ub.horizon:
        raise ValueError("renewal tables must share the same horizon")
    return RenewalTable(ua.u * ub.u)


def gf_identity_check(d: InterArrival, u: RenewalTable, s: float) -> float:
    """``|u(s) (1 - f(s)) - 1|`` from truncated series."""
    N = u.horizon
    if not 0.0 < s < 1.0:
        raise ValueError("s must lie in (0, 1)")
    if (1.0 - s) * N < 40:
        raise TailDominates(f"(1-s)N = {(1 - s) * N:g} < 40")
    n = np.arange(N + 1, dtype=float)
    sn = np.exp(n * math.log(s))
    u_s = math.fsum(u.u * sn)
    # 1 - f(s) = P(tau_1 > N) + sum_{n<=N} f_n (1 - s^n) - sum_{n>N} f_n s^n
    f = d.pmf[: N + 1]
    one_minus_f = float(d.tail_array[N]) + math.fsum(f * -np.expm1(n * math.log(s)))
    tail_bound = max(s ** (N + 1) / (1.0 - s), float(d.tail_array[N]) * s ** (N + 1))
    if tail_bound > 1e-12:
        raise TailDominates(f"series remainder {tail_bound:.3g} too large")
    return abs(u_s * one_minus_f - 1.0)


@dataclass(eq=False)
class KStepTable:
    """Rows ``k = 0..K`` of ``P(tau_k = n)`` (or ``P(tau_k = n, M_k <= m)``), ``n = 0..N``.

    Each row is stored as ``mant[k] * exp(log_scale[k])``.  ``deficit[k]`` is the
    mass of row ``k`` beyond ``N`` (including ``+inf``), tracked by its own
    recursion, so ``row sum + deficit == total_mass(k)`` is a real check.
    """

    mant: np.ndarray
    log_scale: np.ndarray
    deficit: np.ndarray
    trunc_m: Optional[int]
    normalized: bool
    step_mass: float

    @property
    def K(self) -> int:
        return self.mant.shape[0] - 1

    @property
    def N(self) -> int:
        return self.mant.shape[1] - 1

    def pmf(self, k: int) -> np.ndarray:
        return self.mant[k] * math.exp(self.log_scale[k]) if np.isfinite(self.log_scale[k]) else np.zeros(self.N + 1)

    def log_pmf(self, k: int) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.mant[k]) + self.log_scale[k]

    def value(self, k: int, n: int) -> float:
        return float(self.mant[k, n] * math.exp(self.log_scale[k]))

    def log_value(self, k: int, n: int) -> float:
        v = self.mant[k, n]
        return math.log(v) + self.log_scale[k] if v > 0 else -math.inf

    def total_mass(self, k: int) -> float:
        return 1.0 if self.normalized else self.step_mass ** k


def _step_law(d: InterArrival, N: int, trunc_m: Optional[int], normalized: bool):
    m = N if trunc_m is None else min(trunc_m, N)
    step = np.array(d.pmf[: m + 1])
    if trunc_m is None:
        step_mass = 1.0
        # mass of one step beyond j (incl. infinity), j = 0..N
        tail_fn = np.array(d.tail_array[: N + 1])
    else:
        F = np.cumsum(d.pmf[: trunc_m + 1]) if trunc_m <= d.horizon else None
        if F is None:
            raise HorizonExceeded("truncation level beyond horizon")
        step_mass = float(F[-1])
        j = np.minimum(np.arange(N + 1), trunc_m)
        tail_fn = step_mass - F[j]
        if normalized:
            step = step / step_mass
            tail_fn = tail_fn / step_mass
    return step, tail_fn, step_mass


def _conv_row(prev: np.ndarray, step: np.ndarray, step_hat, size: int, n_out: int, direct: bool) -> np.ndarray:
    if direct:
        return np.convolve(prev, step)[:n_out]
    out = scipy.fft.irfft(scipy.fft.rfft(prev, size) * step_hat, size)[:n_out]
    np.maximum(out, 0.0, out=out)
    return out


def k_step_table(d: InterArrival, K: int, N: int, trunc_m: Optional[int] = None,
                 normalized: bool = False, backend: str = "auto", log_domain: bool = True) -> KStepTable:
    """Iterated convolution of the gap law, optionally restricted to gaps ``<= trunc_m``."""
    if N > d.horizon:
        raise HorizonExceeded(f"N={N} > horizon {d.horizon}")
    if K < 0 or K > N:
        raise ValueError("need 0 <= K <= N")
    if trunc_m is not None and trunc_m < d.support_min:
        raise InvalidTruncation(f"trunc_m={trunc_m} < support_min={d.support_min}")
    step, tail_fn, step_mass = _step_law(d, N, trunc_m, normalized)
    if backend == "auto":
        backend = "direct" if (N + 1) * len(step) <= DIRECT_CONV_LIMIT else "fft"
    direct = backend == "direct"
    size = scipy.fft.next_fast_len(N + len(step), real=True)
    step_hat = None if direct else scipy.fft.rfft(step, size)

    mant = np.zeros((K + 1, N + 1))
    log_scale = np.zeros(K + 1)
    deficit = np.zeros(K + 1)
    mant[0, 0] = 1.0
    sm = 1.0 if (normalized or trunc_m is None) else step_mass
    for k in range(1, K + 1):
        prev = mant[k - 1]
        prev_scale = math.exp(log_scale[k - 1]) if np.isfinite(log_scale[k - 1]) else 0.0
        # mass pushed past N from in-window entries, plus old deficit carried along
        spill = math.fsum(prev * tail_fn[::-1]) * prev_scale
        deficit[k] = deficit[k - 1] * sm + spill
        row = _conv_row(prev, step, step_hat, size, N + 1, direct)
        scale = log_scale[k - 1]
        if log_domain:
            peak = row.max()
            if peak > 0:
                row = row / peak
                scale += math.log(peak)
            else:
                scale = -math.inf
        mant[k] = row
        log_scale[k] = scale
    return KStepTable(mant, log_scale, deficit, trunc_m, normalized, step_mass)


def k_step_cdf(table: KStepTable, k: int, n: int) -> float:
    """``P(tau_k <= n)`` (joint with ``M_k <= m`` for truncated tables)."""
    if not (0 <= k <= table.K and 0 <= n <= table.N):
        raise IndexError("(k, n) outside the table")
    return math.fsum(table.mant[k, : n + 1]) * math.exp(table.log_scale[k]) if np.isfinite(table.log_scale[k]) else 0.0


def row_mass_error(table: KStepTable, k: int) -> float:
    return abs(k_step_cdf(table, k, table.N) + table.deficit[k] - table.total_mass(k))


def one_big_gap_mass(d: InterArrival, k: int, n: int, m: int) -> float:
    """``P(tau_k = n, M_k > m)`` for ``m >= n/2``, where at most one gap can exceed ``m``.

    Equals ``k * sum_{j>m} f_j P(tau_{k-1} = n - j)``.
    """
    if 2 * m < n:
        raise ValueError("identity needs m >= n/2")
    if k == 0:
        return 0.0
    table = k_step_table(d, k - 1, n) if k - 1 <= n else None
    if table is None:
        return 0.0
    prev = table.pmf(k - 1)
    j = np.arange(m + 1, n + 1)
    return k * math.fsum(d.pmf[j] * prev[n - j])


def big_jump_conditional(d: InterArrival, k: int, n: int, eps: float) -> float:
    """``P(M_k > (1 - eps) n | tau_k = n)`` from two DP runs."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if k < 1 or k > n:
        raise ValueError("need 1 <= k <= n")
    full = k_step_table(d, k, n)
    denom = full.value(k, n)
    if denom <= 0.0:
        raise ZeroDenominator(f"P(tau_{k} = {n}) = 0")
    m = int(math.floor((1.0 - eps) * n))
    if m < d.support_min:
        return 1.0
    trunc = k_step_table(d, k, n, trunc_m=m)
    # log-space ratio keeps tiny probabilities meaningful
    ratio = math.exp(trunc.log_value(k, n) - full.log_value(k, n)) if trunc.mant[k, n] > 0 else 0.0
    return min(1.0, max(0.0, 1.0 - ratio))


def truncated_sum_tail(d: InterArrival, k: int, m: int, level: float) -> float:
    """``P(sum_{i<=k} G_i^(m) >= level)`` for i.i.d. gaps with law ``P(tau_1 = . | tau_1 <= m)``."""
    if m > d.horizon:
        raise HorizonExceeded(f"m={m} > horizon {d.horizon}")
    step = np.array(d.pmf[: m + 1])
    step /= step.sum()
    law = np.array([1.0])
    for _ in range(k):
        law = np.convolve(law, step)
    lo = int(math.ceil(level))
    return math.fsum(law[lo:]) if lo < len(law) else 0.0


def _tilted_power(step: np.ndarray, k: int, n_out: int):
    """``step^{*k}`` truncated to ``[0, n_out)``, as (mantissa, log scale)."""
    result = np.zeros(n_out)
    result[0] = 1.0
    res_scale = 0.0
    base = np.zeros(n_out)
    base[: min(n_out, len(step))] = step[:n_out]
    base_scale = 0.0

    def mul(a, sa, b, sb):
        if n_out * n_out <= DIRECT_CONV_LIMIT:
            c = np.convolve(a, b)[:n_out]
        else:
            c = _fft_conv(a, b, n_out)
            np.maximum(c, 0.0, out=c)
        peak = c.max()
        if peak <= 0:
            return c, -math.inf
        return c / peak, sa + sb + math.log(peak)

    while k:
        if k & 1:
            result, res_scale = mul(result, res_scale, base, base_scale)
        k >>= 1
        if k:
            base, base_scale = mul(base, base_scale, base, base_scale)
    return result, res_scale


def _tilt_for_mean(f: np.ndarray, target: float) -> float:
    """``lam >= 0`` such that the law ``f_j e^{-lam j}`` (restricted to the array) has mean ``target``."""
    j = np.arange(len(f), dtype=float)

    def mean(lam):
        w = f * np.exp(-lam * (j - 1))
        return float(np.dot(j, w) / w.sum())

    if mean(0.0) <= target:
        return 0.0
    lo, hi = 0.0, 1.0
    while mean(hi) > target:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mean(mid) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    return 0.5 * (lo + hi)


def log_cdf(d: InterArrival, k: int, n: int) -> float:
    """``log P(tau_k <= n)`` computed exactly for very rare events.

    The gap law restricted to ``[1, n]`` is exponentially tilted so that ``k``
    tilted gaps have mean about ``n``; the tilted ``k``-fold convolution is
    then well conditioned near ``n`` and the tilt is undone in log space.
    """
    if n > d.horizon:
        raise HorizonExceeded(f"n={n} > horizon {d.horizon}")
    if k == 0:
        return 0.0
    if k > n:
        return -math.inf
    f = np.array(d.pmf[: n + 1])
    lam = _tilt_for_mean(f, n / k)
    j = np.arange(n + 1, dtype=float)
    w = f * np.exp(-lam * (j - 1))
    z = w.sum()
    mant, scale = _tilted_power(w / z, k, n + 1)
    if not np.isfinite(scale):
        return -math.inf
    # P(tau_k = m) = mant[m] e^{scale} z^k e^{lam (m - k)}
    logs = np.log(np.maximum(mant, 1e-320)) + lam * (j - k)
    logs[mant <= 0] = -np.inf
    top = logs.max()
    return float(top + math.log(math.fsum(np.exp(logs - top))) + scale + k * math.log(z))


# --- export -----------------------------------------------------------------

BINARY_MAGIC = b"RNWZTAB1"


def write_csv(path_or_buf, columns: dict, comments=()) -> None:
    """UTF-8 CSV with ``#``-prefixed header comments; float values use ``repr``."""
    names = list(columns)
    cols = [np.asarray(columns[c]) for c in names]
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(names))
    for row in zip(*cols):
        lines.append(",".join(_fmt(v) for v in row))
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        with open(path_or_buf, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


_BOOLS = {"true": 1.0, "false": 0.0}


def read_csv(path) -> dict:
    """Columns as float arrays; ``true``/``false`` read back as 1/0."""
    with open(path, encoding="utf-8") as fh:
        rows = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    names = rows[0].split(",")
    data = [r.split(",") for r in rows[1:]]
    return {name: np.array([_BOOLS[r[i]] if r[i] in _BOOLS else float(r[i]) for r in data]) for i, name in enumerate(names)}


def write_binary(path_or_buf, array: np.ndarray) -> None:
    """Magic ``RNWZTAB1``, uint32 ndim, uint64 shape, then little-endian float64 (C order)."""
    a = np.ascontiguousarray(array, dtype="<f8")
    header = BINARY_MAGIC + struct.pack("<I", a.ndim) + struct.pack(f"<{a.ndim}Q", *a.shape)
    payload = header + a.tobytes()
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(payload)
    else:
        with open(path_or_buf, "wb") as fh:
            fh.write(payload)


def read_binary(path_or_buf) -> np.ndarray:
    if hasattr(path_or_buf, "read"):
        raw = path_or_buf.read()
    else:
        with open(path_or_buf, "rb") as fh:
            raw = fh.read()
    if raw[:8] != BINARY_MAGIC:
        raise ValueError("bad magic header")
    (ndim,) = struct.unpack_from("<I", raw, 8)
    shape = struct.unpack_from(f"<{ndim}Q", raw, 12)
    off = 12 + 8 * ndim
    return np.frombuffer(raw, dtype="<f8", offset=off).reshape(shape).copy()


def table_to_bytes(table: KStepTable) -> bytes:
    buf = io.BytesIO()
    write_binary(buf, np.column_stack([table.log_scale, table.mant]))
    return buf.getvalue()
