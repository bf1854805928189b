import csv
import json
import math

import numpy as np
import pytest

from nsrbm import cli


def _ini(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


BASE = """
[model]
kind = cosine
[run]
horizon = 5.5
x0 = 0.5
trials = 600
seed = 11
block_size = 100
"""


def test_sample_outputs(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["sample", "--config", _ini(tmp_path, BASE), "--out", str(out)]) == 0
    with open(out / "draws.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 600 and list(rows[0]) == cli.SAMPLE_HEADER
    x = np.array([float(r["X_t"]) for r in rows])
    assert np.all(x >= 0)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["horizon"] == 5.5 and summary["config"]["seed"] == 11
    assert summary["config"]["model"]["kind"] == "cosine"
    assert summary["M"]["n"] == 600
    assert summary["iterations_mean"] <= summary["iterations_bound"] + 0.5


@pytest.mark.parametrize("alg", ["alg1", "alg2", "baseline"])
def test_byte_determinism_across_workers(tmp_path, alg):
    cfg = _ini(tmp_path, BASE)
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["sample", "--config", cfg, "--out", str(a), "--workers", "1", "--algorithm", alg]) == 0
    assert cli.main(["sample", "--config", cfg, "--out", str(b), "--workers", "8", "--algorithm", alg]) == 0
    assert (a / "draws.csv").read_bytes() == (b / "draws.csv").read_bytes()


def test_seed_changes_output(tmp_path):
    cfg = _ini(tmp_path, BASE)
    cli.main(["sample", "--config", cfg, "--out", str(tmp_path / "a")])
    cli.main(["sample", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "12"])
    assert (tmp_path / "a" / "draws.csv").read_bytes() != (tmp_path / "b" / "draws.csv").read_bytes()


def test_stationary_sample(tmp_path):
    cfg = _ini(tmp_path, "[model]\nkind = constant\nmu = -1\n[run]\nhorizon = inf\ntrials = 300\n")
    assert cli.main(["sample", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    s = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert s["config"]["horizon"] == "inf"


@pytest.mark.parametrize("text", [
    "[run]\ntrials = abc\n",
    "[model]\nkind = nope\n",
    "[bogus]\nx = 1\n",
    "[run]\nunknown_key = 1\n",
    "[alg2]\nc = 0.5\n",
    "[model]\nkind = user\nmu = math:cos\n",
])
def test_config_errors_exit_2(tmp_path, text, capsys):
    code = cli.main(["sample", "--config", _ini(tmp_path, text), "--out", str(tmp_path / "o")])
    assert code == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert cli.main(["sample", "--config", str(tmp_path / "none.ini")]) == cli.EXIT_CONFIG


def test_positive_drift_exit_3(tmp_path, capsys):
    cfg = _ini(tmp_path, "[model]\nkind = constant\nmu = 0.5\n[run]\ntrials = 10\n")
    assert cli.main(["sample", "--config", cfg, "--out", str(tmp_path / "o")]) == cli.EXIT_RUNTIME
    assert "nonnegative mean drift" in capsys.readouterr().err


USER_MODULE = """
import math
def mu(t): return 0.5 * math.cos(2 * math.pi * t) - 1.0
def dmu(t): return -math.pi * math.sin(2 * math.pi * t)
def zero_mean(t): return math.cos(2 * math.pi * t)
def dzero_mean(t): return -2 * math.pi * math.sin(2 * math.pi * t)
def one(t): return 1.0
def zero(t): return 0.0
"""


@pytest.mark.parametrize("drift,code", [("mu", 0), ("zero_mean", 3)])
def test_user_model(tmp_path, monkeypatch, drift, code):
    (tmp_path / "usermod_cli.py").write_text(USER_MODULE)
    monkeypatch.syspath_prepend(str(tmp_path))
    cfg = _ini(tmp_path, f"[model]\nkind = user\nmu = usermod_cli:{drift}\nmu_prime = usermod_cli:d{drift}\n"
                         "sigma2 = usermod_cli:one\nsigma2_prime = usermod_cli:zero\nperiod = 1\n"
                         "[run]\nhorizon = 2\ntrials = 50\n")
    assert cli.main(["sample", "--config", cfg, "--out", str(tmp_path / "o")]) == code


def test_piecewise_model(tmp_path):
    cfg = _ini(tmp_path, "[model]\nkind = piecewise-linear\nknots = 0 0.4 1\nmu_values = 0.8 -1.6 0.8\nperiod = 1\n"
                         "[run]\nhorizon = 3\ntrials = 200\n")
    assert cli.main(["sample", "--config", cfg, "--out", str(tmp_path / "o")]) == 0


def test_compare(tmp_path):
    cfg = _ini(tmp_path, BASE + "[baseline]\ndeltas = 0.5 0.125\n")
    assert cli.main(["compare", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    with open(tmp_path / "o" / "compare.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [float(r["delta"]) for r in rows] == [0.5, 0.125]
    assert all(0 <= float(r["p_value"]) <= 1 for r in rows)
    assert "wall_seconds" not in rows[0]
    report = json.loads((tmp_path / "o" / "compare.json").read_text())
    assert "config" in report


def test_plan_warmup(tmp_path):
    cfg = _ini(tmp_path, "[model]\nkind = cosine\n[run]\nhorizon = 30\nx0 = 0\ntrials = 500\n"
                         "[warmup]\nepsilon_tv = 0.2\n")
    assert cli.main(["plan-warmup", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    report = json.loads((tmp_path / "o" / "warmup.json").read_text())
    assert report["quantile"] <= report["recommended_u"] <= report["analytic_bound_u"]
    assert (tmp_path / "o" / "warmup_tail.csv").exists()


def test_convergence_smoke(tmp_path):
    cfg = _ini(tmp_path, "[model]\nkind = cosine\n[run]\nhorizon = inf\n"
                         "[baseline]\nt = 5\n"
                         "[convergence]\nbudgets = 2e4 4e4 8e4 1.6e5 3.2e5\nrepetitions = 3\n"
                         "exact_trial_cost = 2000\nreference_trials = 2000\n")
    assert cli.main(["convergence", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    report = json.loads((tmp_path / "o" / "convergence.json").read_text())
    assert math.isfinite(report["slope_exact"]["slope"]) and math.isfinite(report["slope_baseline"]["slope"])
    assert list((tmp_path / "o" / "cache").glob("reference-*.json"))


def test_convergence_needs_five_budgets(tmp_path):
    cfg = _ini(tmp_path, "[model]\nkind = cosine\n[convergence]\nbudgets = 1e4 2e4\nreference_trials = 100\n")
    assert cli.main(["convergence", "--config", cfg, "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG


def test_rmse_estimate_unbiased_case():
    g = np.random.default_rng(3)
    est = [g.normal(1.0, 2.0, 400) for _ in range(20)]
    r = cli.rmse_estimate(est, {"mean": 1.0, "se": 0.0, "n": 10**6})
    assert r["rmse"] == pytest.approx(0.1, rel=0.15)


def test_inline_comments(tmp_path):
    cfg = _ini(tmp_path, "[model]\nkind = cosine   ; the default drift\n[run]\nhorizon = 2  # short\ntrials = 20\n"
                         "[alg2]\nbeta_rule = improved ; faster\n")
    assert cli.main(["sample", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
