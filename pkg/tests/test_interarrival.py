import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from renewal_zero import interarrival as ia
from renewal_zero.sv_func import Const, LogPow, karamata_ratios

# Frozen by tests/oracles/d0_oracles.py: exact fsum of 1/(j log^2(j+e)) to 10^7, the
# remainder by mpmath quadrature in t = log x plus the midpoint derivative term.
D0_C = 0.6484913287194668
D0_R = {1000: 0.0938642924765859, 100_000: 0.056327198096317345}
# Same script: direct summation of f_j e^{-lam j} to j = 2e5
D0_LAPLACE = {1e-2: (0.18459402039421036, 5.1702718962943655),
              1e-3: (0.10947873807118791, 19.79246373239127)}


def test_d0_constant_and_tail(d0_big):
    assert d0_big.norm_const == pytest.approx(D0_C, rel=1e-12)
    for n, r in D0_R.items():
        assert ia.tail(d0_big, n) == pytest.approx(r, rel=1e-11)


def test_d0_tail_times_log_tends_to_constant(d0_big):
    vals = [ia.tail(d0_big, n) * math.log(n + math.e) for n in (10, 100, 1000, 10_000, 100_000)]
    dev = [abs(v / D0_C - 1) for v in vals]
    assert all(b < a for a, b in zip(dev, dev[1:]))


def test_mass_conservation_builders(d0_big):
    laws = [d0_big, ia.ssrw_z2(10_000), ia.uniform_12(10), ia.delta_one(5),
            ia.build_defective(d0_big, 0.3), ia.build_interleaved(ia.d0(5000)),
            ia.build_regvar(0.5, Const(1.0), N=1000), ia.build_regvar(0.0, LogPow(-2.0), 5, 1000)]
    for d in laws:
        assert d.mass_error() <= 1e-12
        r = d.tail_array
        assert np.all(np.diff(r) <= 0)
        assert np.allclose(r[:-1] - r[1:], d.pmf[1:], rtol=0, atol=1e-15)
        assert r[-1] == pytest.approx(d.p_inf + d.tail_at_horizon, abs=1e-17)


def test_doney_family_ratio():
    d = ia.build_regvar(0.5, Const(1.0), N=100)
    assert d.pmf[1] / d.pmf[2] == pytest.approx(2 ** 1.5, rel=1e-14)


def test_support_shift():
    d = ia.build_regvar(0.0, LogPow(-2.0), support_min=5, N=1000)
    assert d.support_min == 5
    assert np.all(d.pmf[:5] == 0)


def test_not_normalizable():
    with pytest.raises(ia.NotNormalizable):
        ia.build_regvar(0.0, Const(1.0), N=1000)
    with pytest.raises(ia.NotNormalizable):
        ia.build_regvar(0.0, LogPow(-1.0), N=1000)


def test_d0_is_slowly_varying_in_n_f_n(d0_big):
    n = np.array([10 ** j for j in range(1, 5)])
    nf = n * d0_big.pmf[n]
    nf2 = 2 * n * d0_big.pmf[2 * n]
    dev = np.abs(nf2 / nf - 1)
    assert np.all(np.diff(dev) < 0)
    assert np.all(np.diff(karamata_ratios(d0_big.phi, 2.0, range(3, 9))) < 0)


def test_defective_geometric():
    d = ia.build_defective(ia.delta_one(10), 0.5)
    assert np.all(d.tail_array[1:] == 0.5)
    assert ia.tail(d, 10 ** 6, clamp=True) >= 0.5


def test_defective_mass(d0_big):
    d = ia.build_defective(d0_big, 0.3)
    assert math.fsum(d.pmf) + d.tail_at_horizon + 0.3 == pytest.approx(1.0, abs=1e-12)
    for n in (10, 1000):
        assert ia.tail(d, n) == pytest.approx(0.3 + 0.7 * ia.tail(d0_big, n), rel=1e-14)


def test_interleaved_structure():
    sigma = ia.d0(5000)
    d = ia.build_interleaved(sigma)
    assert d.pmf[1] == 0.5
    assert d.pmf[3] == 0.0
    assert np.all(d.pmf[3::2] == 0.0)
    assert d.horizon == 10_000
    assert d.pmf[2] == 0.5 * sigma.pmf[1]
    ratios = [ia.tail(d, n) / ia.tail(sigma, n) for n in (10, 100, 1000)]
    dev = [abs(x - 0.5) for x in ratios]
    assert all(b < a for a, b in zip(dev, dev[1:]))


def test_tail_edges():
    assert ia.tail(ia.delta_one(5), 1) == 0.0
    with pytest.raises(ia.HorizonExceeded):
        ia.tail(ia.delta_one(5), 6)


def test_truncated_moment(d0_big):
    d = d0_big
    assert ia.truncated_moment(d, 10, 0) == pytest.approx(math.fsum(d.pmf[:11]), rel=1e-14)
    assert ia.truncated_moment(d, 10, 1) == pytest.approx(math.fsum(np.arange(11) * d.pmf[:11]), rel=1e-14)
    assert ia.truncated_moment(d, 10, 2) == pytest.approx(math.fsum(np.arange(11) ** 2 * d.pmf[:11]), rel=1e-14)
    ratios = [ia.truncated_moment(d, m, 1) / (m * float(d.phi_eff(m))) for m in (100, 1000, 10_000, 100_000)]
    dev = [abs(r - 1) for r in ratios]
    assert all(b < a for a, b in zip(dev, dev[1:]))


def test_laplace_delta_one():
    lp = ia.laplace(ia.delta_one(200), 0.5)
    assert lp.nu == pytest.approx(-math.expm1(-0.5), rel=1e-15)
    assert lp.nu_prime == pytest.approx(math.exp(-0.5), rel=1e-15)


def test_laplace_against_summation(d0_big):
    for lam, (nu, nup) in D0_LAPLACE.items():
        lp = ia.laplace(d0_big, lam)
        assert lp.nu == pytest.approx(nu, rel=1e-12)
        assert lp.nu_prime == pytest.approx(nup, rel=1e-12)


def test_laplace_small_lambda_regime(d0_big):
    lam = 1e-4
    lp = ia.laplace(d0_big, lam)
    assert 0.5 <= lp.nu / ia.tail(d0_big, math.ceil(1 / lam)) <= 2.0
    trend = [ia.laplace(d0_big, 10.0 ** -j).nu_prime * 10.0 ** -j / float(d0_big.phi_eff(10.0 ** j))
             for j in (2, 3, 4)]
    dev = [abs(t - 1) for t in trend]
    assert all(b < a for a, b in zip(dev, dev[1:]))


def test_laplace_monotone_grid(d0_big):
    lams = np.geomspace(1e-5, 1.0, 25)
    pairs = [ia.laplace(d0_big, l) for l in lams]
    assert np.all(np.diff([p.nu for p in pairs]) > 0)
    assert np.all(np.diff([p.nu_prime for p in pairs]) < 0)


def test_laplace_tail_dominates():
    # explicit law with mass beyond the horizon and no tail model
    d = ia.InterArrival(np.array([0.0, 0.5, 0.3]), tail_at_horizon=0.2)
    with pytest.raises(ia.TailDominates):
        ia.laplace(d, 1e-3)


def test_explicit_defect_and_periodicity():
    d = ia.build_explicit([0.25, 0.25])
    assert d.p_inf == pytest.approx(0.5)
    with pytest.raises(ia.PeriodicDistribution):
        ia.build_explicit([0.0, 0.5, 0.0, 0.5])


def test_spec_round_trip(d0_big):
    spec = {"family": "defective", "p_inf": 0.3,
            "base": {"family": "regvar", "alpha": 0.0, "phi": {"kind": "logpow", "a": -2.0},
                     "support_min": 1, "horizon": 1000}}
    d = ia.from_spec(spec)
    assert d.spec == spec
    again = ia.from_spec(d.spec)
    assert np.array_equal(again.pmf, d.pmf)
    il = ia.from_spec({"family": "interleaved", "sigma": spec["base"]})
    assert il.horizon == 2000
    named = ia.from_json('{"family": "named", "name": "d0", "horizon": 1000}')
    assert np.array_equal(named.pmf, ia.d0(1000).pmf)


def test_tail_extension_matches_brute_sum():
    d = ia.d0(1000)
    big = ia.d0(100_000)
    for x in (2000, 50_000):
        assert d.tail_extended(x) == pytest.approx(ia.tail(big, x), rel=1e-12)


@given(st.floats(0.01, 1.0), st.lists(st.floats(0.0, 1.0), min_size=1, max_size=40), st.floats(0.5, 1.0))
@settings(max_examples=200, deadline=None)
def test_explicit_property(first, rest, scale):
    w = np.array([first] + rest)  # gap 1 always present, so the law is aperiodic
    p = w / w.sum() * scale
    d = ia.build_explicit(p)
    assert d.mass_error() <= 1e-12
    r = d.tail_array
    assert np.all(np.diff(r) <= 1e-16)
    assert np.allclose(r[:-1] - r[1:], d.pmf[1:], atol=1e-15)


def test_ssrw_keeps_pi_constant():
    d = ia.ssrw_z2(100_000)
    assert d.mass_error() <= 1e-12
    # exact pi / (n log^2(n + e)) past the cutoff, so r(n) log n / pi -> 1
    n = 50_000
    assert d.pmf[n] == pytest.approx(math.pi / (n * math.log(n + math.e) ** 2), rel=1e-14)
    dev = [abs(ia.tail(d, n) * math.log(n) / math.pi - 1) for n in (100, 1000, 100_000)]
    assert all(b < a for a, b in zip(dev, dev[1:]))
    assert not np.array_equal(d.pmf, ia.d0(100_000).pmf)
    with pytest.raises(ValueError):
        ia.ssrw_z2(100)
