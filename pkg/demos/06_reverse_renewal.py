"""
Reading f back from u
=====================

For zero-index laws f_n ~ r(n)^2 u_n holds only on average.  The interleaved
law puts zero mass on odd gaps beyond 1, so the pointwise ratio flips between
0 and about 2 while the window average stays close to the smooth value.
"""
from renewal_zero import acceptance, asymptotics, interarrival, renewal_exact

d = interarrival.build_interleaved(interarrival.d0(50_000))
u = renewal_exact.renewal_mass(d)

for n in (1000, 10_000, 100_000):
    eps = acceptance.default_eps(n)
    lhs, rhs = asymptotics.reverse_avg_pair(d, u, n, eps)
    odd = d.pmf[n - 1] / (interarrival.tail(d, n - 1) ** 2 * u.u[n - 1])
    even = d.pmf[n] / (interarrival.tail(d, n) ** 2 * u.u[n])
    print(f"n={n:>6}: pointwise odd {odd:.3f} even {even:.3f}, averaged {lhs / rhs:.4f} (eps {eps:.3f})")

# the transient version: f_n ~ p_inf^2 u_n
t = interarrival.build_defective(interarrival.d0(100_000), 0.3)
ut = renewal_exact.renewal_mass(t)
for n in (100, 1000, 10_000, 100_000):
    print(f"defective n={n:>6}: f_n / (p_inf^2 u_n) = {t.pmf[n] / (0.09 * ut.u[n]):.4f}")
