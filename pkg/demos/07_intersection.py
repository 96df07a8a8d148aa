"""
Two independent renewals meeting
================================

The common renewal times of two independent renewals form a renewal with
mass u_a(n) u_b(n).  For two copies of the zero-index law the product is
summable, so the meeting process is transient.
"""
import math
import warnings

from renewal_zero import interarrival, renewal_exact

a = renewal_exact.renewal_mass(interarrival.d0(20_000))
both = renewal_exact.intersect_renewals(a, a)
with warnings.catch_warnings():
    warnings.simplefilter("ignore", renewal_exact.NegativePmfWarning)
    f = renewal_exact.invert_renewal(both)
print("gap mass of the meeting process up to 2e4:", math.fsum(f[1:]))
print("expected number of meetings up to 2e4:", both.U[-1])

# meeting a simple random walk's returns instead
b = renewal_exact.renewal_mass(interarrival.ssrw_z2(20_000))
mixed = renewal_exact.intersect_renewals(a, b)
print("meetings with SSRW returns up to 2e4:", mixed.U[-1])
