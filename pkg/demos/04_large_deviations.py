"""
Too many renewals too early
===========================

P(tau_k <= n) for k phi(n) large is a large deviation event.  The exact
log-probability comes from a tilted convolution; the predicted rate uses the
de Bruijn conjugate of phi.  Importance sampling with the same tilt gives an
unbiased estimate with a small standard error.
"""
import math

from renewal_zero import asymptotics, interarrival, rare_event, renewal_exact

d = interarrival.d0(100_000)

for k, n in ((1000, 10_000), (3000, 30_000)):
    exact = -renewal_exact.log_cdf(d, k, n)
    rate = asymptotics.ld_rate(d, n, k)
    print(f"k={k} n={n}: -log P = {exact:.2f}, rate = {rate:.2f}, ratio {exact / rate:.4f}")

k, n = 200, 2000
tilt = rare_event.solve_tilt(d, 0.9 * n / k)
print(f"tilt lambda* = {tilt.lambda_star:.5f}, tilted mean {tilt.tilted_mean:.3f}")
est = rare_event.is_estimate_cdf(d, n, k, count=100_000, seed=3)
dp = math.exp(renewal_exact.log_cdf(d, k, n))
print(f"IS {est.value:.4e} +- {est.std_error:.1e}   DP {dp:.4e}   z = {(est.value - dp) / est.std_error:+.2f}")
