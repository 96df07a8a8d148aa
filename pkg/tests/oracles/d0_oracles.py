"""Recompute the frozen reference values used by the unit tests (takes a few seconds).

Independent of the library: plain numpy summation plus mpmath quadrature.
"""
import math

import mpmath as mp
import numpy as np

mp.mp.dps = 30
M = 10 ** 7
j = np.arange(1, M + 1, dtype=float)
g = 1.0 / (j * np.log(j + math.e) ** 2)
head = math.fsum(g)
T = mp.log(M + mp.mpf(0.5))


def h(t):
    return 1 / mp.log(mp.e ** t + mp.e) ** 2


def f(x):
    return 1 / (x * mp.log(x + mp.e) ** 2)


remainder = mp.quad(h, [T, 30, 100, 1000, 1e4, 1e6]) + mp.quad(h, [1e6, mp.inf])
S = head + remainder + mp.diff(f, M + 0.5) / 24
C = float(1 / S)
print("D0_C", repr(C))
for n in (1000, 100_000):
    print("r", n, repr(float(C * (S - math.fsum(g[:n])))))
for lam in (1e-2, 1e-3):
    e = np.exp(-lam * j[:200_000])
    nu = 1 - C * math.fsum(g[:200_000] * e)
    nup = C * math.fsum(j[:200_000] * g[:200_000] * e)
    print("laplace", lam, repr(nu), repr(nup))

# conjugate of (log(y+e))^-2 at x = 1e8 by high-precision bisection
lo, hi = mp.mpf(1), mp.mpf(1e14)
for _ in range(300):
    mid = (lo + hi) / 2
    lo, hi = (mid, hi) if mid / mp.log(mid + mp.e) ** 2 < 1e8 else (lo, mid)
print("phistar(1e8)", repr(float((lo + hi) / 2 / 1e8)))
