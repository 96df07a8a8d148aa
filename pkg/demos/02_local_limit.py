"""
Where tau_k lands: local limit
==============================

For k much smaller than 1/phi(n) the k-th renewal at time n is dominated
by a single big gap, P(tau_k = n) ~ k f_n (1 - r_n)^k.
"""
import math

from renewal_zero import acceptance, asymptotics, interarrival, renewal_exact

d = interarrival.d0(100_000)

for n in (1000, 10_000, 100_000):
    k = acceptance.local_limit_k(d, n)
    table = renewal_exact.k_step_table(d, k, n)
    log_exact = table.log_value(k, n)
    log_pred = asymptotics.log_predict_local_pmf(d, k, n)
    print(f"n={n:>6} k={k:>3}  exact/predicted = {math.exp(log_exact - log_pred):.5f}")

# the one-big-gap share of the mass
for n in (200, 2000, 20_000):
    print(f"n={n:>6}  P(largest gap > 0.9 n | tau_3 = n) = {renewal_exact.big_jump_conditional(d, 3, n, 0.1):.4f}")
