import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from renewal_zero import asymptotics as asy
from renewal_zero import interarrival as ia
from renewal_zero import rare_event as rv
from renewal_zero import renewal_exact as rx


def _closed_form_uniform_tilt(target):
    # mean of {1: q, 2: q^2} / (q + q^2) is (1 + 2q) / (1 + q); bisection on q in (0, 1)
    lo, hi = 0.0, 1.0
    for _ in range(200):
        q = 0.5 * (lo + hi)
        if (1 + 2 * q) / (1 + q) < target:
            lo = q
        else:
            hi = q
    return -math.log(0.5 * (lo + hi))


def test_uniform_tilt_closed_form():
    d = ia.uniform_12(10)
    t = rv.solve_tilt(d, 1.25)
    assert t.lambda_star == pytest.approx(_closed_form_uniform_tilt(1.25), rel=1e-7)
    assert t.lambda_star == pytest.approx(math.log(3.0), rel=1e-7)
    assert t.tilted_pmf[1] == pytest.approx(0.75, rel=1e-7)
    assert t.tilted_second_moment == pytest.approx(0.75 + 4 * 0.25, rel=1e-7)
    assert rv.tilted_variance_check(t) == pytest.approx(float(np.dot(np.arange(11) ** 2, t.tilted_pmf)), rel=1e-12)


def test_tilt_out_of_range():
    with pytest.raises(rv.TargetOutOfRange):
        rv.solve_tilt(ia.uniform_12(10), 1.5)
    with pytest.raises(rv.TargetOutOfRange):
        rv.solve_tilt(ia.uniform_12(10), 1.0)
    with pytest.raises(rv.TargetOutOfRange):
        rv.solve_tilt(ia.build_defective(ia.d0(1000), 0.2), 5.0)


def test_delta_one_second_moment():
    d = ia.delta_one(10)
    for lam in (0.0, 0.3, 2.0):
        assert rv.TiltSolution.at(d, lam, 1.0).tilted_second_moment == pytest.approx(1.0, rel=1e-15)


@pytest.mark.parametrize("target", [2.0, 10.0, 100.0, 1000.0])
def test_tilt_invariants(d0_big, target):
    t = rv.solve_tilt(d0_big, target)
    assert t.tilted_mean == pytest.approx(target, rel=1e-6)
    assert math.fsum(t.tilted_pmf) + t.overflow_mass == pytest.approx(1.0, abs=1e-10)
    assert t.nu_prime / (1 - t.nu) == pytest.approx(target, rel=1e-6)
    ref = ia.laplace(d0_big, t.lambda_star)
    assert t.nu == pytest.approx(ref.nu, rel=1e-10)
    assert t.nu_prime == pytest.approx(ref.nu_prime, rel=1e-8)


def test_tilt_scale_against_conjugate(d0_big):
    t = rv.solve_tilt(d0_big, 100.0)
    conj = asy.conjugate_for(d0_big)
    ref = 100.0 * conj(100.0)
    assert 0.5 <= (1 / t.lambda_star) / ref <= 2.0


def test_tilted_second_moment_scale(d0_big):
    t = rv.solve_tilt(d0_big, 1000.0)
    assert 0.5 <= t.tilted_second_moment * t.lambda_star / 1000.0 <= 2.0


def test_weight_identity(d0_small):
    t = rv.solve_tilt(d0_small, 40.0)
    rng = np.random.default_rng(0)
    paths = rng.integers(1, 2001, size=(200, 7))
    log_orig = np.log(d0_small.pmf[paths]).sum(axis=1)
    log_tilt = np.log(t.tilted_pmf[paths]).sum(axis=1)
    lw = rv.log_weight(t, paths.sum(axis=1), 7)
    assert np.max(np.abs(log_tilt + lw - log_orig)) < 1e-12 * np.max(np.abs(log_orig))


def test_zero_tilt_weights_are_one():
    d = ia.uniform_12(10)
    t = rv.TiltSolution.at(d, 0.0, 1.5)
    assert np.all(rv.log_weight(t, np.array([3, 7, 12]), 5) == 0.0)
    a = rv.is_estimate_cdf(d, 7, 5, tilt=t, count=5000, seed=1)
    b = rv.plain_estimate_cdf(d, 7, 5, count=5000, seed=1)
    exact = rx.k_step_cdf(rx.k_step_table(d, 5, 10), 5, 7)
    assert abs(a.value - exact) <= 4 * a.std_error
    assert abs(b.value - exact) <= 4 * b.std_error


def test_sample_paths_delta_one():
    s = rv.sample_paths(ia.delta_one(20), 7, 1000, seed=5)
    assert np.all(s.tau == 7) and np.all(s.max_gap == 1)
    assert s.overflow_fraction == 0.0


def test_sample_mean_uniform():
    s = rv.sample_paths(ia.uniform_12(10), 5, 20_000, seed=11)
    se = s.tau.std(ddof=1) / math.sqrt(len(s.tau))
    assert abs(s.tau.mean() - 7.5) <= 3 * se


def test_sample_chi_square_against_dp(d0_big):
    k, count = 10, 1_000_000
    s = rv.sample_paths(d0_big, k, count, seed=2024, resolve_overflow=False)
    row = rx.k_step_table(d0_big, k, 200).pmf(k)
    obs = np.bincount(s.tau[(s.tau >= 0) & (s.tau <= 200)], minlength=201)
    ns = np.arange(k, 201)
    exp = row[ns] * count
    o = obs[ns]
    # pool everything past n = 200 (and overflow) into one cell
    o = np.append(o, count - o.sum())
    exp = np.append(exp, count - exp.sum())
    assert np.all(exp >= 5)
    p = stats.chisquare(o, exp).pvalue
    assert p > 1e-3


def test_dp_cdf_matches_plain_mc(d0_big):
    k, n = 50, 500
    exact = rx.k_step_cdf(rx.k_step_table(d0_big, k, n), k, n)
    est = rv.plain_estimate_cdf(d0_big, n, k, count=200_000, seed=9)
    assert abs(est.value - exact) <= 4 * est.std_error


def test_is_matches_dp(d0_big):
    k, n = 200, 2000
    est = rv.is_estimate_cdf(d0_big, n, k, count=100_000, seed=3)
    exact = math.exp(rx.log_cdf(d0_big, k, n))
    assert abs(est.value - exact) <= 3 * est.std_error
    assert est.method == "tilted" and est.n_samples == 100_000


def test_is_beats_plain_se(d0_big):
    # k phi(n) >= 5; the plain-MC standard error is sqrt(p(1-p)/count) for the exact p
    k, n, count = 600, 6000, 20_000
    assert k * float(d0_big.phi_eff(n)) >= 5
    p = math.exp(rx.log_cdf(d0_big, k, n))
    est = rv.is_estimate_cdf(d0_big, n, k, count=count, seed=4)
    assert est.std_error < math.sqrt(p * (1 - p) / count)
    assert abs(est.value - p) <= 4 * est.std_error


def test_estimates_reproducible(d0_small, monkeypatch):
    a = rv.is_estimate_cdf(d0_small, 1000, 50, count=30_000, seed=77)
    monkeypatch.setenv("RENEWAL_ZERO_THREADS", "1")
    b = rv.is_estimate_cdf(d0_small, 1000, 50, count=30_000, seed=77)
    monkeypatch.setenv("RENEWAL_ZERO_THREADS", "3")
    c = rv.is_estimate_cdf(d0_small, 1000, 50, count=30_000, seed=77)
    assert a.to_json() == b.to_json() == c.to_json()
    d = rv.is_estimate_cdf(d0_small, 1000, 50, count=30_000, seed=78)
    assert d.value != a.value


def test_n_threads_env(monkeypatch):
    monkeypatch.setenv("RENEWAL_ZERO_THREADS", "2")
    assert rv.n_threads() == 2


def test_mc_estimate_json():
    e = rv.MCEstimate(0.5, 0.01, 10, 3, "plain", "abc")
    assert set(json.loads(e.to_json())) == {"value", "std_error", "n_samples", "seed", "method", "config_hash"}


def test_config_hash_order_independent():
    a = {"kind": "darling", "seed": 1, "distribution": {"family": "named", "name": "d0"}}
    b = {"distribution": {"name": "d0", "family": "named"}, "seed": 1, "kind": "darling"}
    assert rv.config_hash(a) == rv.config_hash(b)
    assert rv.config_hash(a) != rv.config_hash({**a, "seed": 2})


def test_darling_k_one_image_law(d0_big):
    count = 200_000
    res = rv.darling_empirical(d0_big, 1, count, seed=21, y_grid=np.array([0.0, 0.1, 0.2, 0.4, 0.6, 0.8]))
    r = d0_big.tail_array
    exact = [0.0] + [1.0 - math.fsum(d0_big.pmf[1:][r[1:] >= y]) for y in res.y[1:]]
    assert res.ecdf[0] == 0.0
    assert np.max(np.abs(res.ecdf - exact)) < 4 / math.sqrt(count)


def test_darling_trend(d0_big):
    s10 = rv.darling_empirical(d0_big, 10, 50_000, seed=7).sup_distance
    s100 = rv.darling_empirical(d0_big, 100, 50_000, seed=7).sup_distance
    assert s100 < s10


def test_darling_excess_overflow():
    d = ia.InterArrival(np.array([0.0, 0.5, 0.3]), tail_at_horizon=0.2)
    with pytest.raises(rv.ExcessOverflow):
        rv.darling_empirical(d, 10, 1000, seed=0)


def test_overflow_resolved_log_tau():
    d = ia.d0(100)
    s = rv.sample_paths(d, 5, 20_000, seed=3)
    assert s.overflow_fraction > 0
    assert np.all(s.tau[s.overflow] == -1)
    assert np.all(s.log_tau[s.overflow] > math.log(100))
    inside = ~s.overflow
    assert np.array_equal(np.exp(s.log_tau[inside]).round().astype(int), s.tau[inside])


@given(st.lists(st.floats(0.0, 10.0), min_size=1, max_size=50))
@settings(max_examples=200, deadline=None)
def test_alias_table_exact(w):
    w = np.array(w)
    if w.sum() <= 0:
        return
    t = rv.AliasTable.build(w)
    K = len(w)
    implied = t.prob.copy()
    np.add.at(implied, t.alias, 1.0 - t.prob)
    assert np.allclose(implied / K, w / w.sum(), atol=1e-12)
