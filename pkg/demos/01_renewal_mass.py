"""
Renewal mass of a zero-index law
================================

The gap law f_n ~ C / (n log^2 n) has infinite mean and a tail that decays
like 1/log n.  Renewals still happen infinitely often, but u_n = P(n is a
renewal) goes to zero.  The strong renewal prediction is u_n ~ f_n / r(n)^2.
"""
import numpy as np

from renewal_zero import asymptotics, interarrival, renewal_exact

# gap law on 1..1e5, tail past the horizon handled analytically
d = interarrival.d0(100_000)
print("normaliser C =", d.norm_const)

# exact renewal mass by the FFT renewal solver
u = renewal_exact.renewal_mass(d)
print("recursion residual:", renewal_exact.recursion_residual(d, u))

for n in (10, 100, 1000, 10_000, 100_000):
    pred = asymptotics.predict_renewal_mass(d, n)
    print(f"n={n:>7}  u_n={u.u[n]:.6e}  predicted={pred:.6e}  ratio={u.u[n] / pred:.5f}")

# inverting u gives back f
f = renewal_exact.invert_renewal(renewal_exact.renewal_mass(d, 2000))
print("max |invert(u) - f| on n <= 2000:", np.max(np.abs(f - d.pmf[:2001])))
