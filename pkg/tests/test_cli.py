import json
import math

import numpy as np
import pytest

from renewal_zero import asymptotics as asy
from renewal_zero import cli
from renewal_zero import interarrival as ia
from renewal_zero import rare_event as rv
from renewal_zero import renewal_exact as rx

D0_SMALL = {"family": "named", "name": "d0", "horizon": 2000}


def _run(tmp_path, cfg, name="out"):
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(cfg), encoding="utf-8")
    out = tmp_path / name
    code = cli.main(["run", "--config", str(path), "--out", str(out)])
    return code, out


CONFIGS = [
    {"kind": "renewal-mass", "distribution": {"family": "named", "name": "delta1", "horizon": 100},
     "n_grid": [1, 10, 100]},
    {"kind": "local-limit", "distribution": D0_SMALL, "n_grid": [200, 1000]},
    {"kind": "darling", "distribution": D0_SMALL, "k_grid": [5, 20], "count": 4000, "seed": 1},
    {"kind": "ld-rate", "distribution": D0_SMALL, "pairs": [[50, 500], [100, 1000]]},
    {"kind": "fuk-nagaev", "distribution": D0_SMALL, "k_grid": [2, 4], "m_grid": [32], "n_grid": [128]},
    {"kind": "reverse-avg", "distribution": D0_SMALL, "n_grid": [100, 1000], "eps": 0.1},
    {"kind": "intersect", "distribution": D0_SMALL,
     "distribution_b": {"family": "named", "name": "uniform12", "horizon": 500}},
    {"kind": "big-jump", "distribution": D0_SMALL, "n_grid": [500], "k_grid": [2, 3]},
    {"kind": "is-vs-dp", "distribution": D0_SMALL, "pairs": [[50, 500]], "count": 5000, "seed": 2},
]


@pytest.mark.parametrize("cfg", CONFIGS, ids=[c["kind"] for c in CONFIGS])
def test_every_kind_runs(tmp_path, cfg):
    code, out = _run(tmp_path, cfg)
    assert code == cli.EXIT_OK
    man = json.loads((out / "manifest.json").read_text())
    assert man["kind"] == cfg["kind"]
    assert man["config_hash"] == rv.config_hash(cfg)
    text = (out / man["files"][0]).read_text()
    assert text.startswith(f"# config_hash {man['config_hash']}\n")
    cols = rx.read_csv(out / man["files"][0])
    assert all(len(v) > 0 for v in cols.values())


def test_delta_one_exact_column(tmp_path):
    code, out = _run(tmp_path, CONFIGS[0])
    cols = rx.read_csv(out / "renewal-mass.csv")
    assert np.all(cols["exact"] == 1.0)
    assert np.all(cols["ratio"] == 1.0)


def test_csv_byte_identical(tmp_path):
    cfg = CONFIGS[2]
    _, a = _run(tmp_path, cfg, "a")
    _, b = _run(tmp_path, cfg, "b")
    assert (a / "darling.csv").read_bytes() == (b / "darling.csv").read_bytes()


def test_darling_matches_library(tmp_path):
    code, out = _run(tmp_path, CONFIGS[2])
    cols = rx.read_csv(out / "darling.csv")
    ref = rv.darling_empirical(ia.d0(2000), 20, 4000, 1).sup_distance
    assert cols["sup_distance"][1] == ref


def test_local_limit_columns(tmp_path):
    _, out = _run(tmp_path, CONFIGS[1])
    cols = rx.read_csv(out / "local-limit.csv")
    d = ia.d0(2000)
    n, k = int(cols["n"][1]), int(cols["k"][1])
    assert cols["exact"][1] == pytest.approx(rx.k_step_table(d, k, n).value(k, n), rel=1e-12)
    assert cols["predicted"][1] == pytest.approx(asy.predict_local_pmf(d, k, n), rel=1e-12)


def test_is_vs_dp_flag(tmp_path):
    _, out = _run(tmp_path, CONFIGS[8])
    cols = rx.read_csv(out / "is-vs-dp.csv")
    assert cols["within_3se"][0] == 1


@pytest.mark.parametrize("cfg", [
    {"kind": "renewal-mass", "distribution": D0_SMALL, "n_grid": [5000]},
    {"kind": "nope", "distribution": D0_SMALL},
    {"kind": "renewal-mass", "distribution": D0_SMALL},
    {"kind": "reverse-avg", "distribution": D0_SMALL, "n_grid": [100], "eps": "wide"},
    {"kind": "renewal-mass", "distribution": {"family": "regvar", "alpha": 0.0,
                                              "phi": {"kind": "const", "c": 1.0}, "horizon": 100},
     "n_grid": [10]},
])
def test_config_errors_exit_one(tmp_path, cfg, capsys):
    code, _ = _run(tmp_path, cfg)
    assert code == cli.EXIT_CONFIG
    assert capsys.readouterr().err.strip()


def test_unreadable_config(tmp_path):
    assert cli.main(["run", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    assert cli.main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 1


def test_invariant_failure_exit_two(tmp_path, monkeypatch):
    monkeypatch.setattr(asy, "fuk_nagaev_bound", lambda *a: 0.0)
    code, _ = _run(tmp_path, CONFIGS[4])
    assert code == cli.EXIT_INVARIANT


def test_invert_round_trip(tmp_path, capsys):
    cfg = {"kind": "renewal-mass", "distribution": {"family": "named", "name": "d0", "horizon": 500},
           "n_grid": [500], "dense": True}
    _, out = _run(tmp_path, cfg)
    dest = tmp_path / "f.csv"
    code = cli.main(["invert", "--u", str(out / "renewal-mass.csv"), "--column", "exact", "--out", str(dest)])
    assert code == 0
    f = rx.read_csv(dest)["f"]
    assert np.max(np.abs(f - ia.d0(500).pmf)) < 1e-12
    assert "# missing mass" in dest.read_text()


def test_invert_rejects_gappy_grid(tmp_path):
    _, out = _run(tmp_path, CONFIGS[0])
    assert cli.main(["invert", "--u", str(out / "renewal-mass.csv"), "--column", "exact"]) == 1


def test_invert_to_stdout(tmp_path, capsys):
    src = tmp_path / "u.csv"
    rx.write_csv(src, {"n": np.arange(4), "u": np.array([1.0, 0.5, 0.75, 0.625])})
    assert cli.main(["invert", "--u", str(src)]) == 0
    text = capsys.readouterr().out
    rows = [l for l in text.splitlines() if l and not l.startswith("#")][1:]
    f = [float(r.split(",")[1]) for r in rows]
    assert f == pytest.approx([0.0, 0.5, 0.5, 0.0], abs=1e-15)


def test_selftest_subset(capsys):
    assert cli.main(["selftest", "--only", "0,2"]) == 0
    out = capsys.readouterr().out
    assert "[PASS] 00" in out and "2/2 criteria passed" in out


def test_selftest_detects_corruption(capsys):
    assert cli.main(["selftest", "--only", "0", "--inject-corrupt-pmf"]) != 0
    assert "[FAIL] 00" in capsys.readouterr().out


def test_threads_recorded(tmp_path, monkeypatch):
    monkeypatch.setenv("RENEWAL_ZERO_THREADS", "2")
    _, out = _run(tmp_path, CONFIGS[0])
    assert json.loads((out / "manifest.json").read_text())["threads"] == 2


def test_eps_schedule():
    assert cli.eps_schedule(0.2)(10 ** 6) == 0.2
    assert cli.eps_schedule(None)(1000) == pytest.approx(1 / math.log(1000 + math.e))
    assert cli.eps_schedule({"c": 2.0})(1000) == pytest.approx(2 / math.log(1000 + math.e))
    with pytest.raises(cli.ConfigError):
        cli.eps_schedule([1])
