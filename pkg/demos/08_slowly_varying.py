"""
Slowly varying functions and their conjugates
=============================================

phi(x) = log(x + e)^-2 is the slowly varying part of the zero-index law.
The conjugate phi* inverts y phi(y) = x.  For log powers phi*(x) / (1/phi(x))
tends to 1, but only at the speed of log log x / log x, as the output shows.
"""
from renewal_zero.sv_func import ConjugateSV, LogLogPow, LogPow, karamata_ratios, sv_eval

phi = LogPow(-2.0)
print("|phi(2x)/phi(x) - 1| at x = 1e3..1e8:")
print(karamata_ratios(phi, 2.0, range(3, 9)))

conj = ConjugateSV(phi)
for x in (1e4, 1e6, 1e8):
    print(f"x={x:.0e}: phi*(x) = {conj(x):.3f}, 1/phi(x) = {1 / sv_eval(phi, x):.3f}")

# trees of nodes serialise to JSON
tree = LogPow(-1.0) * LogLogPow(2.0)
print(tree.to_json())
