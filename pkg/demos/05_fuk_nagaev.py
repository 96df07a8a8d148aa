"""
A Fuk-Nagaev bound for truncated sums
=====================================

If every gap is at most m, the sum of k gaps rarely exceeds n/2.  The
explicit bound is compared with the exact truncated convolution.
"""
from renewal_zero import asymptotics, interarrival, renewal_exact
from renewal_zero.sv_func import Const

laws = {"d0": interarrival.d0(100_000),
        "alpha=1/2": interarrival.build_regvar(0.5, Const(1.0), N=10_000)}

for name, d in laws.items():
    print(name)
    for k in (2, 8, 32):
        for m, n in ((64, 256), (64, 1024)):
            exact = renewal_exact.truncated_sum_tail(d, k, m, n / 2)
            bound = asymptotics.fuk_nagaev_bound(d, k, m, n)
            print(f"  k={k:>2} m={m} n={n:>4}: exact {exact:.3e}  bound {bound:.3e}")
