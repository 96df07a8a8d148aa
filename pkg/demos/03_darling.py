"""
Darling's law for k r(tau_k)
============================

After k renewals the scaled tail k r(tau_k) is approximately Exp(1).  We
sample paths (Vose alias table, Philox streams) and compare with 1 - e^{-y}.
"""
from renewal_zero import asymptotics, interarrival, rare_event, renewal_exact

d = interarrival.d0(100_000)

for k in (1, 10, 100):
    res = rare_event.darling_empirical(d, k, 50_000, seed=7)
    print(f"k={k:>3}  sup distance {res.sup_distance:.4f}  paths past the horizon {res.overflow_fraction:.1%}")

# extended version: P(tau_k <= n) sits between a_M (1 - r_n)^k and (1 - r_n)^k
n = 10_000
for M in (0.1, 0.3):
    k = int(M / float(d.phi_eff(n)))
    p = renewal_exact.k_step_cdf(renewal_exact.k_step_table(d, k, n), k, n)
    upper = (1 - interarrival.tail(d, n)) ** k
    print(f"M={M}: {asymptotics.extdarling_lower_const(M) * upper:.4f} <= {p:.4f} <= {upper:.4f}")
