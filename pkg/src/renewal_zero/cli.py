"""``renewal-zero`` command line: experiment runner, self-test and renewal inversion.

Experiment config (JSON)::

    {
      "kind": "local-limit",
      "distribution": {"family": "named", "name": "d0", "horizon": 100000},
      "n_grid": [1000, 10000],
      "k_rule": {"rule": "sqrt"},          # or {"rule": "fixed", "k": 10} / {"rule": "inverse-tail", "c": 2.0}
      "eps": {"c": 1.0},                   # window c / log(n + e); a bare number means a fixed eps
      "seed": 0
    }

Kind-specific keys are documented in the README.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
import time
import warnings
from importlib import metadata
from typing import Callable

import numpy as np
import scipy

from . import acceptance
from . import asymptotics as asy
from . import interarrival as ia
from . import rare_event as rv
from . import renewal_exact as rx
from .sv_func import BelowMonotoneThreshold

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 1, 2


class ConfigError(ValueError):
    pass


class InvariantFailure(AssertionError):
    pass


# --- config helpers -----------------------------------------------------------

def _need(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"missing config key {key!r}")
    return cfg[key]


def _int_list(cfg: dict, key: str) -> list[int]:
    vals = _need(cfg, key)
    if not isinstance(vals, list) or not vals:
        raise ConfigError(f"{key!r} must be a non-empty list")
    return [int(v) for v in vals]


def eps_schedule(spec) -> Callable[[int], float]:
    """``c / log(n + e)`` by default; a plain number gives a constant window."""
    if spec is None:
        return acceptance.default_eps
    if isinstance(spec, (int, float)):
        val = float(spec)
        return lambda n: val
    if isinstance(spec, dict) and set(spec) <= {"c"}:
        c = float(spec.get("c", 1.0))
        return lambda n: acceptance.default_eps(n, c)
    raise ConfigError(f"bad eps spec {spec!r}")


def k_rule(spec, d: ia.InterArrival) -> Callable[[int], int]:
    """Presets: fixed k, ``floor(1/sqrt(phi(n) r(n)))`` and ``floor(c / r(n))``."""
    spec = spec or {"rule": "sqrt"}
    rule = spec.get("rule")
    if rule == "fixed":
        k = int(_need(spec, "k"))
        return lambda n: k
    if rule == "sqrt":
        return lambda n: max(1, acceptance.local_limit_k(d, n))
    if rule == "inverse-tail":
        c = float(spec.get("c", 1.0))
        return lambda n: max(1, int(c / ia.tail(d, n)))
    raise ConfigError(f"unknown k rule {rule!r}")


def _check_grid(d: ia.InterArrival, grid, what="n_grid"):
    for n in grid:
        if not 1 <= n <= d.horizon:
            raise ia.HorizonExceeded(f"{what} point {n} outside 1..{d.horizon}")


# --- experiment kinds ---------------------------------------------------------

def _renewal_mass(cfg, d):
    grid = _int_list(cfg, "n_grid")
    _check_grid(d, grid)
    u = rx.renewal_mass(d, max(grid))
    if cfg.get("dense", False):
        grid = list(range(max(grid) + 1))
    res = rx.recursion_residual(d, u)
    if res > acceptance.TOLERANCES["recursion"]:
        raise InvariantFailure(f"recursion residual {res:.3g}")
    exact = [float(u.u[n]) for n in grid]
    pred = [_maybe(lambda n=n: asy.predict_renewal_mass(d, n)) if n > 0 else math.nan for n in grid]
    ratio = [e / p if p and p == p else math.nan for e, p in zip(exact, pred)]
    return {"n": grid, "exact": exact, "predicted": pred, "ratio": ratio}, {"recursion_residual": res}


def _maybe(fn):
    try:
        return fn()
    except asy.RegimeUnknown:
        return math.nan


def _local_limit(cfg, d):
    grid = _int_list(cfg, "n_grid")
    _check_grid(d, grid)
    rule = k_rule(cfg.get("k_rule"), d)
    rows = {"n": [], "k": [], "exact": [], "predicted": [], "ratio": []}
    for n in grid:
        k = rule(n)
        if k > n:
            raise ConfigError(f"k={k} exceeds n={n}")
        t = rx.k_step_table(d, k, n)
        le = t.log_value(k, n)
        lp = asy.log_predict_local_pmf(d, k, n)
        rows["n"].append(n)
        rows["k"].append(k)
        rows["exact"].append(math.exp(le))
        rows["predicted"].append(math.exp(lp))
        rows["ratio"].append(math.exp(le - lp))
    return rows, {}


def _darling(cfg, d):
    ks = _int_list(cfg, "k_grid")
    count = int(cfg.get("count", 100_000))
    seed = int(cfg.get("seed", 0))
    rows = {"k": [], "sup_distance": [], "overflow_fraction": []}
    for k in ks:
        r = rv.darling_empirical(d, k, count, seed)
        rows["k"].append(k)
        rows["sup_distance"].append(r.sup_distance)
        rows["overflow_fraction"].append(r.overflow_fraction)
    return rows, {}


def _ld_rate(cfg, d):
    pairs = _need(cfg, "pairs")
    rows = {"k": [], "n": [], "neg_log_p": [], "rate": [], "ratio": []}
    for k, n in pairs:
        k, n = int(k), int(n)
        _check_grid(d, [n])
        nl = -rx.log_cdf(d, k, n)
        rate = asy.ld_rate(d, n, k)
        rows["k"].append(k)
        rows["n"].append(n)
        rows["neg_log_p"].append(nl)
        rows["rate"].append(rate)
        rows["ratio"].append(nl / rate)
    return rows, {}


def _fuk_nagaev(cfg, d):
    ks, ms, ns = _int_list(cfg, "k_grid"), _int_list(cfg, "m_grid"), _int_list(cfg, "n_grid")
    _check_grid(d, ms, "m_grid")
    rows = {"k": [], "m": [], "n": [], "exact": [], "bound": [], "dominates": []}
    for k in ks:
        for m in ms:
            for n in ns:
                exact = rx.truncated_sum_tail(d, k, m, n / 2)
                bound = asy.fuk_nagaev_bound(d, k, m, n)
                for key, v in zip(rows, (k, m, n, exact, bound, bound >= exact)):
                    rows[key].append(v)
    bad = rows["dominates"].count(False)
    if bad:
        raise InvariantFailure(f"Fuk-Nagaev bound below exact tail at {bad} grid points")
    return rows, {"violations": 0}


def _reverse_avg(cfg, d):
    grid = _int_list(cfg, "n_grid")
    _check_grid(d, grid)
    eps = eps_schedule(cfg.get("eps"))
    u = rx.renewal_mass(d, max(grid))
    rows = {"n": [], "eps": [], "lhs": [], "rhs": [], "ratio": [], "pointwise": []}
    for n in grid:
        e = eps(n)
        lhs, rhs = asy.reverse_avg_pair(d, u, n, e)
        for key, v in zip(rows, (n, e, lhs, rhs, lhs / rhs, float(d.pmf[n]) / rhs)):
            rows[key].append(v)
    return rows, {}


def _intersect(cfg, d):
    other = ia.from_spec(_need(cfg, "distribution_b"))
    N = int(cfg.get("horizon", min(d.horizon, other.horizon)))
    if N > min(d.horizon, other.horizon):
        raise ia.HorizonExceeded(f"horizon {N} beyond one of the inputs")
    ua, ub = rx.renewal_mass(d, N), rx.renewal_mass(other, N)
    uc = rx.intersect_renewals(ua, ub)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", rx.NegativePmfWarning)
        f = rx.invert_renewal(uc)
    n = np.arange(N + 1)
    cols = {"n": n, "u_a": ua.u, "u_b": ub.u, "u_intersect": uc.u, "f_intersect": f[: N + 1]}
    return cols, {"intersect_mass_to_horizon": math.fsum(f[1: N + 1])}


def _big_jump(cfg, d):
    grid = _int_list(cfg, "n_grid")
    _check_grid(d, grid)
    ks = _int_list(cfg, "k_grid")
    eps = float(cfg.get("eps", 0.1))
    rows = {"n": [], "k": [], "eps": [], "value": []}
    for n in grid:
        for k in ks:
            v = rx.big_jump_conditional(d, k, n, eps)
            for key, x in zip(rows, (n, k, eps, v)):
                rows[key].append(x)
    return rows, {}


def _is_vs_dp(cfg, d):
    pairs = _need(cfg, "pairs")
    count = int(cfg.get("count", 100_000))
    seed = int(cfg.get("seed", 0))
    eps = float(cfg.get("eps", 0.1))
    rows = {"k": [], "n": [], "is_value": [], "std_error": [], "dp_value": [], "within_3se": []}
    for k, n in pairs:
        k, n = int(k), int(n)
        _check_grid(d, [n])
        est = rv.is_estimate_cdf(d, n, k, eps=eps, count=count, seed=seed)
        exact = math.exp(rx.log_cdf(d, k, n))
        ok = abs(est.value - exact) <= 3.0 * est.std_error
        for key, v in zip(rows, (k, n, est.value, est.std_error, exact, ok)):
            rows[key].append(v)
    return rows, {}


KINDS = {
    "renewal-mass": _renewal_mass,
    "local-limit": _local_limit,
    "darling": _darling,
    "ld-rate": _ld_rate,
    "fuk-nagaev": _fuk_nagaev,
    "reverse-avg": _reverse_avg,
    "intersect": _intersect,
    "big-jump": _big_jump,
    "is-vs-dp": _is_vs_dp,
}


def run_experiment(cfg: dict, out_dir: str) -> dict:
    """Run one config; returns the manifest.  Raises ConfigError / InvariantFailure / module errors."""
    kind = _need(cfg, "kind")
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    try:
        d = ia.from_spec(_need(cfg, "distribution"))
    except (KeyError, TypeError) as e:
        raise ConfigError(f"bad distribution spec: {e}") from e
    if "horizon" in cfg and kind != "intersect" and int(cfg["horizon"]) > d.horizon:
        raise ia.HorizonExceeded(f"horizon {cfg['horizon']} beyond distribution horizon {d.horizon}")
    h = rv.config_hash(cfg)
    t0 = time.perf_counter()
    cols, extra = KINDS[kind](cfg, d)
    elapsed = time.perf_counter() - t0
    os.makedirs(out_dir, exist_ok=True)
    csv_name = f"{kind}.csv"
    rx.write_csv(os.path.join(out_dir, csv_name), cols, comments=[f"config_hash {h}", f"kind {kind}"])
    manifest = {
        "config_hash": h,
        "kind": kind,
        "files": [csv_name],
        "versions": _versions(),
        "runtimes": {"experiment_seconds": elapsed},
        "threads": rv.n_threads(),
        **extra,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def _versions() -> dict:
    try:
        own = metadata.version("renewal-zero")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {"renewal_zero": own, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


# --- subcommands --------------------------------------------------------------

MODULE_ERRORS = (ia.HorizonExceeded, ia.NotNormalizable, ia.TailDominates, ia.PeriodicDistribution,
                 asy.RegimeUnknown, BelowMonotoneThreshold, rx.InvalidTruncation, rx.ZeroDenominator,
                 rv.TargetOutOfRange, rv.NonMonotoneBracket, rv.ExcessOverflow)


def cmd_run(args) -> int:
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        manifest = run_experiment(cfg, args.out)
    except (OSError, json.JSONDecodeError, ConfigError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantFailure as e:
        print(f"InvariantFailure: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    except MODULE_ERRORS as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {os.path.join(args.out, manifest['files'][0])} (config_hash {manifest['config_hash']})")
    return EXIT_OK


def cmd_selftest(args) -> int:
    suite = acceptance.Suite(corrupt_pmf=args.inject_corrupt_pmf)
    only = None if args.only is None else [int(x) for x in args.only.split(",")]
    outcomes = []
    for fn in suite.CRITERIA:
        num = int(fn.__name__[1:3])
        if only is not None and num not in only:
            continue
        o = fn(suite)
        outcomes.append(o)
        print(o.line(), flush=True)
    passed = sum(o.passed for o in outcomes)
    print(f"{passed}/{len(outcomes)} criteria passed", flush=True)
    return EXIT_OK if passed == len(outcomes) else EXIT_CONFIG


def cmd_invert(args) -> int:
    try:
        data = rx.read_csv(args.u)
    except (OSError, ValueError, IndexError) as e:
        print(f"config error: cannot read {args.u}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    col = args.column if args.column else ("u" if "u" in data else list(data)[-1])
    if col not in data:
        print(f"config error: no column {col!r}", file=sys.stderr)
        return EXIT_CONFIG
    u = data[col]
    if "n" in data and not np.array_equal(data["n"], np.arange(len(u))):
        print("config error: the n column must be 0, 1, 2, ... without gaps", file=sys.stderr)
        return EXIT_CONFIG
    if len(u) < 2 or u[0] != 1.0:
        print("config error: u must start with u_0 = 1", file=sys.stderr)
        return EXIT_CONFIG
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", rx.NegativePmfWarning)
        f = rx.invert_renewal(rx.RenewalTable(u))
    n = np.arange(len(u))
    defect = 1.0 - math.fsum(f[1:])
    comments = [f"inverted from {os.path.basename(args.u)}", f"missing mass {defect!r}"]
    for w in caught:
        comments.append(f"warning {w.message}")
        print(f"NegativePmfWarning: {w.message}", file=sys.stderr)
    if args.out:
        rx.write_csv(args.out, {"n": n, "f": f[: len(u)]}, comments)
    else:
        rx.write_csv(sys.stdout, {"n": n, "f": f[: len(u)]}, comments)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="renewal-zero", description="Heavy-tailed renewal experiments")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)
    s = sub.add_parser("selftest", help="run the acceptance suite")
    s.add_argument("--only", help="comma-separated criterion numbers")
    s.add_argument("--inject-corrupt-pmf", action="store_true", help=argparse.SUPPRESS)
    s.set_defaults(func=cmd_selftest)
    i = sub.add_parser("invert", help="recover the gap law from a renewal-mass CSV")
    i.add_argument("--u", required=True)
    i.add_argument("--column")
    i.add_argument("--out")
    i.set_defaults(func=cmd_invert)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
