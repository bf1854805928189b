"""Command-line front end: ``nsrbm {sample,compare,plan-warmup,convergence}``.

Configuration is an INI file (see ``README.md``); command-line flags override
the ``[run]`` section. Every output number is a function of the configuration
and the seed alone, so runs are byte-reproducible for any worker count.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import importlib
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import baseline as B
from . import rbm as R
from .model import (CoefficientSpec, Constant, CosineAffine, ModelError, NormalizedModel, PiecewiseLinear,
                    UserFunction, fit_envelope, normalize, reverse_spec)
from .stats import ks_two_sample, loglog_slope, summarize

log = logging.getLogger("nsrbm")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

ALGORITHMS = ("alg1", "alg2", "baseline", "naive-euler")
SAMPLE_HEADER = ["substream", "replication", "M", "v", "Y_end", "X_t", "age", "iterations",
                 "skeleton_points", "rejections"]


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending section and field."""


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ModelConfig:
    kind: str = "cosine"
    params: dict = field(default_factory=dict)
    gamma_bar: Optional[float] = None
    d: Optional[float] = None


@dataclass
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    horizon: float = math.inf
    x0: float = 0.0
    algorithm: str = "alg2"
    trials: int = 1000
    seed: int = 0
    workers: int = 1
    block_size: int = R.DEFAULT_BLOCK
    out: str = "nsrbm-out"
    c: float = 2.0
    epsilon: float = 0.1
    beta_rule: str = "standard"
    theta: Optional[float] = None
    delta: Optional[float] = None
    baseline_delta: float = 2.0**-10
    baseline_T: float = B.DEFAULT_HORIZON
    compare_deltas: List[float] = field(default_factory=lambda: [2.0**-1, 2.0**-4, 2.0**-10])
    epsilon_tv: float = 0.1
    budgets: List[float] = field(default_factory=list)
    repetitions: int = 10
    exact_trial_cost: float = 6000.0
    reference_trials: int = 500_000
    cache_dir: Optional[str] = None

    def alg2(self) -> R.Alg2Config:
        return R.Alg2Config(self.c, self.epsilon, self.beta_rule, self.theta, self.delta)

    def echo(self) -> dict:
        d = asdict(self)
        d["horizon"] = _fmt_extended(self.horizon)
        return d


def _fmt_extended(x: float):
    return "inf" if math.isinf(x) else x


def _get(sec, key, conv, default, section):
    if sec is None or key not in sec:
        return default
    raw = sec[key].strip()
    try:
        return conv(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} ({exc})") from None


def _extended(raw: str) -> float:
    if raw.lower() in ("inf", "infinity", "+inf"):
        return math.inf
    return float(raw)


def _optional_float(raw: str) -> Optional[float]:
    return None if raw.lower() in ("", "auto", "none") else float(raw)


def _float_list(raw: str) -> List[float]:
    return [float(v) for v in raw.replace(",", " ").split()]


def _model_config(cp) -> ModelConfig:
    if not cp.has_section("model"):
        return ModelConfig()
    sec = cp["model"]
    kind = sec.get("kind", "cosine").strip()
    params = {k: v.strip() for k, v in sec.items() if k not in ("kind", "gamma_bar", "d")}
    return ModelConfig(kind, params, _get(sec, "gamma_bar", float, None, "model"),
                       _get(sec, "d", float, None, "model"))


def load_config(path: Optional[str] = None, text: Optional[str] = None) -> ExperimentConfig:
    """Parse an INI configuration; unknown keys are reported, not ignored."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    try:
        if path is not None:
            with open(path) as fh:
                cp.read_file(fh)
        if text is not None:
            cp.read_string(text)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    known = {
        "run": {"horizon", "x0", "algorithm", "trials", "seed", "workers", "block_size", "out"},
        "alg2": {"c", "epsilon", "beta_rule", "theta", "delta"},
        "baseline": {"delta", "t", "deltas"},
        "warmup": {"epsilon_tv"},
        "convergence": {"budgets", "repetitions", "exact_trial_cost", "reference_trials", "cache_dir"},
    }
    for section in cp.sections():
        if section == "model":
            continue
        if section not in known:
            raise ConfigError(f"[{section}]: unknown section")
        for key in cp[section]:
            if key not in known[section]:
                raise ConfigError(f"[{section}] {key}: unknown field")
    cfg = ExperimentConfig(model=_model_config(cp))
    run = cp["run"] if cp.has_section("run") else None
    cfg.horizon = _get(run, "horizon", _extended, cfg.horizon, "run")
    cfg.x0 = _get(run, "x0", float, cfg.x0, "run")
    cfg.algorithm = _get(run, "algorithm", str, cfg.algorithm, "run")
    cfg.trials = _get(run, "trials", int, cfg.trials, "run")
    cfg.seed = _get(run, "seed", int, cfg.seed, "run")
    cfg.workers = _get(run, "workers", int, cfg.workers, "run")
    cfg.block_size = _get(run, "block_size", int, cfg.block_size, "run")
    cfg.out = _get(run, "out", str, cfg.out, "run")
    a2 = cp["alg2"] if cp.has_section("alg2") else None
    cfg.c = _get(a2, "c", float, cfg.c, "alg2")
    cfg.epsilon = _get(a2, "epsilon", float, cfg.epsilon, "alg2")
    cfg.beta_rule = _get(a2, "beta_rule", str, cfg.beta_rule, "alg2")
    cfg.theta = _get(a2, "theta", _optional_float, cfg.theta, "alg2")
    cfg.delta = _get(a2, "delta", _optional_float, cfg.delta, "alg2")
    bl = cp["baseline"] if cp.has_section("baseline") else None
    cfg.baseline_delta = _get(bl, "delta", float, cfg.baseline_delta, "baseline")
    cfg.baseline_T = _get(bl, "t", float, cfg.baseline_T, "baseline")
    cfg.compare_deltas = _get(bl, "deltas", _float_list, cfg.compare_deltas, "baseline")
    wu = cp["warmup"] if cp.has_section("warmup") else None
    cfg.epsilon_tv = _get(wu, "epsilon_tv", float, cfg.epsilon_tv, "warmup")
    cv = cp["convergence"] if cp.has_section("convergence") else None
    cfg.budgets = _get(cv, "budgets", _float_list, cfg.budgets, "convergence")
    cfg.repetitions = _get(cv, "repetitions", int, cfg.repetitions, "convergence")
    cfg.exact_trial_cost = _get(cv, "exact_trial_cost", float, cfg.exact_trial_cost, "convergence")
    cfg.reference_trials = _get(cv, "reference_trials", int, cfg.reference_trials, "convergence")
    cfg.cache_dir = _get(cv, "cache_dir", str, cfg.cache_dir, "convergence")
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    """Check every field against the samplers' preconditions before any work starts."""
    checks = [
        (cfg.algorithm in ALGORITHMS, "[run] algorithm", f"must be one of {ALGORITHMS}"),
        (cfg.horizon > 0, "[run] horizon", "must be positive"),
        (cfg.x0 >= 0, "[run] x0", "must be nonnegative"),
        (cfg.trials >= 2, "[run] trials", "must be at least 2"),
        (0 <= cfg.seed < 2**64, "[run] seed", "must be a 64-bit unsigned integer"),
        (cfg.workers >= 1, "[run] workers", "must be positive"),
        (cfg.block_size >= 1, "[run] block_size", "must be positive"),
        (cfg.c > 1, "[alg2] c", "must exceed 1"),
        (cfg.epsilon > 0, "[alg2] epsilon", "must be positive"),
        (cfg.beta_rule in R.BETA_RULES, "[alg2] beta_rule", f"must be one of {R.BETA_RULES}"),
        (cfg.theta is None or cfg.theta > 0, "[alg2] theta", "must be positive"),
        (cfg.delta is None or cfg.delta > 0, "[alg2] delta", "must be positive"),
        (cfg.baseline_delta > 0, "[baseline] delta", "must be positive"),
        (cfg.baseline_T > 0, "[baseline] t", "must be positive"),
        (len(cfg.compare_deltas) > 0 and all(x > 0 for x in cfg.compare_deltas), "[baseline] deltas",
         "must be a nonempty list of positive steps"),
        (0 < cfg.epsilon_tv < 1, "[warmup] epsilon_tv", "must lie in (0, 1)"),
        (all(b > 0 for b in cfg.budgets), "[convergence] budgets", "must be positive"),
        (cfg.repetitions >= 2, "[convergence] repetitions", "must be at least 2"),
        (cfg.exact_trial_cost > 0, "[convergence] exact_trial_cost", "must be positive"),
        (cfg.reference_trials >= 2, "[convergence] reference_trials", "must be at least 2"),
    ]
    for ok, name, msg in checks:
        if not ok:
            raise ConfigError(f"{name}: {msg}")
    build_spec(cfg.model)


# ---------------------------------------------------------------------------
# model construction


def _num(params, key, section="model", default=None):
    if key not in params:
        if default is None:
            raise ConfigError(f"[{section}] {key}: required for kind")
        return default
    try:
        return float(params[key])
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {params[key]!r}") from None


def _callable(params, key):
    if key not in params or not params[key]:
        raise ConfigError(f"[model] {key}: required for kind 'user' (format module:function)")
    target = params[key]
    mod, _, name = target.partition(":")
    try:
        return getattr(importlib.import_module(mod), name)
    except (ImportError, AttributeError, ValueError) as exc:
        raise ConfigError(f"[model] {key}: cannot import {target!r} ({exc})") from None


def _list(params, key):
    if key not in params:
        raise ConfigError(f"[model] {key}: required for kind")
    try:
        return _float_list(params[key])
    except ValueError:
        raise ConfigError(f"[model] {key}: cannot parse {params[key]!r}") from None


def build_spec(mc: ModelConfig) -> CoefficientSpec:
    """Coefficient spec of the reflected process described by ``[model]``."""
    p = mc.params
    try:
        if mc.kind == "constant":
            return CoefficientSpec(Constant(_num(p, "mu")), Constant(_num(p, "sigma2", default=1.0)))
        if mc.kind == "cosine":
            mu = CosineAffine(_num(p, "amplitude", default=1.0), _num(p, "frequency", default=1.0),
                              _num(p, "offset", default=-0.5), _num(p, "phase", default=0.0))
            return CoefficientSpec(mu, Constant(_num(p, "sigma2", default=1.0)))
        if mc.kind == "piecewise-linear":
            period = _num(p, "period") if "period" in p else None
            mu = PiecewiseLinear(_list(p, "knots"), _list(p, "mu_values"), period)
            if "sigma2_values" in p:
                s2 = PiecewiseLinear(_list(p, "knots"), _list(p, "sigma2_values"), period)
            else:
                s2 = Constant(_num(p, "sigma2", default=1.0))
            return CoefficientSpec(mu, s2)
        if mc.kind == "user":
            period = _num(p, "period") if "period" in p else None
            extent = _num(p, "extent") if "extent" in p else None
            if period is None and extent is None:
                raise ConfigError("[model] period: a user model needs a period or an extent")
            mu = UserFunction(_callable(p, "mu"), _callable(p, "mu_prime"), period, extent, p["mu"])
            s2 = UserFunction(_callable(p, "sigma2"), _callable(p, "sigma2_prime"), period, extent, p["sigma2"])
            return CoefficientSpec(mu, s2)
    except ModelError as exc:
        raise ConfigError(f"[model] {exc}") from None
    raise ConfigError(f"[model] kind: unknown kind {mc.kind!r}")


def reversed_model(cfg: ExperimentConfig) -> NormalizedModel:
    """Normalized model of the time-reversed coefficients at the configured horizon."""
    spec = reverse_spec(build_spec(cfg.model), cfg.horizon)
    model = normalize(spec, gamma_bar=cfg.model.gamma_bar, d=cfg.model.d)
    if model.envelope is None:
        fit_envelope(model, gamma_bar=cfg.model.gamma_bar)  # raises with the reason
    return model


def model_hash(cfg: ExperimentConfig) -> str:
    key = json.dumps({"model": asdict(cfg.model), "horizon": _fmt_extended(cfg.horizon)}, sort_keys=True)
    return hashlib.sha256(key.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# output helpers


def _r(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, (int, np.integer, str)) else _r(v) for v in row])


def _json_default(o):
    if isinstance(o, (np.floating, float)):
        return _r(o) if not math.isfinite(o) else float(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and not math.isfinite(obj):
        return _r(obj)
    return obj


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(_clean(payload), fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _outdir(cfg: ExperimentConfig) -> Path:
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _derived_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence([seed, *key]).generate_state(1, dtype=np.uint64)[0])


# ---------------------------------------------------------------------------
# sampling


@dataclass
class Draws:
    """Per-replication columns in canonical (substream, replication) order."""

    block: np.ndarray
    M: np.ndarray
    v: np.ndarray
    Y_end: np.ndarray
    iterations: np.ndarray
    skeleton_points: np.ndarray
    rejections: np.ndarray


def draw(cfg: ExperimentConfig, model: NormalizedModel, algorithm: Optional[str] = None,
         n: Optional[int] = None, seed: Optional[int] = None, delta: Optional[float] = None) -> Draws:
    algorithm = algorithm or cfg.algorithm
    n = cfg.trials if n is None else n
    seed = cfg.seed if seed is None else seed
    if algorithm in ("alg1", "alg2"):
        b = R.sample_triplets(model, cfg.horizon, n, seed, algorithm, cfg.alg2(), cfg.workers, cfg.block_size)
        return Draws(b.block, b.M, b.v, b.Y_end, b.iterations, b.skeleton_points, b.rejections)
    T = model.lam(cfg.horizon) if math.isfinite(cfg.horizon) else cfg.baseline_T
    out = B.discretize_batch(model, T, cfg.baseline_delta if delta is None else delta, n, seed,
                             naive=algorithm == "naive-euler", workers=cfg.workers, block_size=cfg.block_size)
    zeros = np.zeros(n, dtype=np.int64)
    return Draws(np.arange(n) // cfg.block_size,
                 out[:, 0], np.full(n, np.nan), out[:, 1], zeros, zeros, zeros)


def run_sample(cfg: ExperimentConfig) -> dict:
    """Draw ``trials`` replications and write ``draws.csv`` plus ``summary.json``."""
    model = reversed_model(cfg)
    out = _outdir(cfg)
    d = draw(cfg, model)
    finite = math.isfinite(cfg.horizon)
    if finite:
        free = cfg.x0 + d.Y_end
        idle = d.M >= free
        x_t = np.where(idle, d.M, free)
        age = np.where(idle, d.v, np.inf)
    else:
        x_t, age = d.M.copy(), d.v.copy()
    rep = np.arange(d.M.size) % cfg.block_size
    rows = zip(d.block, rep, d.M, d.v, d.Y_end if finite else np.full(d.M.size, np.nan), x_t, age,
               d.iterations, d.skeleton_points, d.rejections)
    _write_csv(out / "draws.csv", SAMPLE_HEADER, rows)
    summary = {
        "config": cfg.echo(),
        "model_hash": model_hash(cfg),
        "envelope": asdict(model.require_envelope()),
        "M": summarize(d.M).as_dict(),
        "X_t": summarize(x_t).as_dict(),
        "iterations_mean": float(np.mean(d.iterations)),
        "idle_fraction": float(np.mean(np.isfinite(age))) if finite else 1.0,
    }
    if cfg.algorithm == "alg2":
        env = model.require_envelope()
        summary["iterations_bound"] = 1.0 / -math.expm1(-2.0 * (cfg.c - 1.0) * env.working_d() * env.gamma_bar)
    _write_json(out / "summary.json", summary)
    return summary


def run_compare(cfg: ExperimentConfig) -> dict:
    """KS comparison of an exact sampler against the discretization at each step in ``deltas``.

    With ``--algorithm naive-euler`` the discretized arm uses grid maxima only.
    """
    model = reversed_model(cfg)
    out = _outdir(cfg)
    exact_alg = cfg.algorithm if cfg.algorithm in ("alg1", "alg2") else "alg2"
    naive = cfg.algorithm == "naive-euler"
    exact = draw(cfg, model, exact_alg).M
    rows, timing = [], {}
    for i, delta in enumerate(cfg.compare_deltas):
        t0 = time.perf_counter()
        approx = draw(cfg, model, "naive-euler" if naive else "baseline", seed=_derived_seed(cfg.seed, 1, i),
                      delta=delta).M
        timing[_r(delta)] = time.perf_counter() - t0
        ks = ks_two_sample(exact, approx)
        rows.append((delta, ks.statistic, ks.pvalue, float(np.mean(approx))))
    _write_csv(out / "compare.csv", ["delta", "ks_statistic", "p_value", "mean_M"], rows)
    report = {"config": cfg.echo(), "exact_algorithm": exact_alg, "naive": naive,
              "exact_mean_M": float(np.mean(exact)),
              "rows": [dict(zip(["delta", "ks_statistic", "p_value", "mean_M"], r)) for r in rows],
              "wall_seconds": timing}
    _write_json(out / "compare.json", report)
    return report


def run_plan_warmup(cfg: ExperimentConfig) -> dict:
    """Warm-up recommendation with the empirical age tail and the analytic bound."""
    model = reversed_model(cfg)
    out = _outdir(cfg)
    alg = cfg.algorithm if cfg.algorithm in ("alg1", "alg2") else "alg2"
    plan = R.plan_warmup(model, cfg.epsilon_tv, cfg.horizon, cfg.x0, cfg.trials, cfg.seed, alg, cfg.alg2(),
                         cfg.workers)
    _write_csv(out / "warmup_tail.csv", ["u", "empirical_tail", "analytic_bound"],
               zip(plan.tail_u, plan.tail_empirical, plan.tail_bound))
    report = {"config": cfg.echo(), "recommended_u": plan.recommended, "quantile": plan.quantile,
              "se": plan.se, "analytic_bound_u": plan.bound, "epsilon_tv": plan.epsilon,
              "n_trials": plan.n_trials, "n_infinite": plan.n_infinite, "note": plan.note}
    _write_json(out / "warmup.json", report)
    return report


# ---------------------------------------------------------------------------
# convergence study


def default_budgets(levels: int = 6, n_min: int = 125, n_max: int = 4000, T: float = B.DEFAULT_HORIZON):
    """Geometric budgets whose baseline trial counts span ``[n_min, n_max]``."""
    lo = T * (n_min + 1) / B.experiment_delta(n_min)
    hi = T * (n_max + 1) / B.experiment_delta(n_max)
    return list(np.geomspace(lo, hi, levels))


def reference_value(cfg: ExperimentConfig, model: NormalizedModel) -> dict:
    """High-trial exact mean of ``M``, cached on disk by model hash."""
    cache = Path(cfg.cache_dir) if cfg.cache_dir else Path(cfg.out) / "cache"
    cache.mkdir(parents=True, exist_ok=True)
    path = cache / f"reference-{model_hash(cfg)}-{cfg.reference_trials}-{cfg.seed}.json"
    if path.exists():
        with open(path) as fh:
            return json.load(fh)
    b = R.sample_triplets(model, cfg.horizon, cfg.reference_trials, _derived_seed(cfg.seed, 99), "alg2",
                          cfg.alg2(), cfg.workers, cfg.block_size)
    s = summarize(b.M)
    payload = {"mean": s.mean, "se": s.se, "n": s.n, "model_hash": model_hash(cfg)}
    _write_json(path, payload)
    return payload


def rmse_estimate(estimates: Sequence[np.ndarray], reference: dict) -> dict:
    """RMSE of one ``N``-trial mean from ``R`` independent samples of size ``N``.

    ``rmse^2 = sd^2 / N + bias^2``; the sd is pooled over all samples and the
    squared bias is estimated from the grand mean, less its own sampling
    variance (floored at zero).
    """
    R_ = len(estimates)
    n = estimates[0].size
    means = np.array([math.fsum(x) / n for x in estimates])
    var = math.fsum(math.fsum((x - m) ** 2) for x, m in zip(estimates, means)) / (R_ * (n - 1))
    se = math.sqrt(var / n)
    bias = float(np.mean(means)) - reference["mean"]
    noise = var / (R_ * n) + reference["se"] ** 2
    bias2 = max(bias * bias - noise, 0.0)
    return {"se": se, "bias": bias, "rmse": math.sqrt(se * se + bias2)}


def run_convergence(cfg: ExperimentConfig) -> dict:
    """RMSE against budget for the exact sampler and the discretization.

    The exact arm spends ``exact_trial_cost`` units per trial; the baseline
    spends one unit per step with ``(N, delta)`` from the budget allocation.
    """
    model = reversed_model(cfg)
    out = _outdir(cfg)
    budgets = cfg.budgets or default_budgets(T=cfg.baseline_T)
    if len(budgets) < 5:
        raise ConfigError("[convergence] budgets: need at least 5 levels")
    ref = reference_value(cfg, model)
    rows, exact_pts, base_pts = [], [], []
    for i, c in enumerate(budgets):
        n_exact = max(2, int(round(c / cfg.exact_trial_cost)))
        plan = B.allocate_budget(c, cfg.baseline_T)
        ex = [R.sample_triplets(model, cfg.horizon, n_exact, _derived_seed(cfg.seed, 2, i, r), "alg2",
                                cfg.alg2(), cfg.workers, cfg.block_size).M for r in range(cfg.repetitions)]
        bl = [B.discretize_batch(model, plan.T, plan.delta, plan.N, _derived_seed(cfg.seed, 3, i, r),
                                 workers=cfg.workers, block_size=cfg.block_size)[:, 0]
              for r in range(cfg.repetitions)]
        e, b = rmse_estimate(ex, ref), rmse_estimate(bl, ref)
        rows.append((c, "exact", n_exact, math.nan, e["se"], e["bias"], e["rmse"]))
        rows.append((c, "baseline", plan.N, plan.delta, b["se"], b["bias"], b["rmse"]))
        exact_pts.append((c, e["rmse"]))
        base_pts.append((c, b["rmse"]))
        log.info("budget %.3g: exact N=%d rmse=%.4g, baseline N=%d delta=%.3g rmse=%.4g bias=%.3g",
                 c, n_exact, e["rmse"], plan.N, plan.delta, b["rmse"], b["bias"])
    _write_csv(out / "convergence.csv", ["budget", "arm", "N", "delta", "se", "bias", "rmse"], rows)
    fe, fb = loglog_slope(exact_pts), loglog_slope(base_pts)
    report = {"config": cfg.echo(), "reference": ref,
              "slope_exact": {"slope": fe.slope, "stderr": fe.stderr},
              "slope_baseline": {"slope": fb.slope, "stderr": fb.stderr},
              "budgets": list(budgets)}
    _write_json(out / "convergence.json", report)
    return report


# ---------------------------------------------------------------------------
# entry point

COMMANDS = {
    "sample": run_sample,
    "compare": run_compare,
    "plan-warmup": run_plan_warmup,
    "convergence": run_convergence,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nsrbm", description="Exact simulation of reflected Brownian motion "
                                                           "with time-varying drift and variance.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="INI configuration file")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--algorithm", choices=ALGORITHMS)
    ap.add_argument("--trials", type=int)
    return ap


def _setup_logging():
    level = os.environ.get("NSRBM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        for name in ("seed", "workers", "out", "algorithm", "trials"):
            val = getattr(args, name)
            if val is not None:
                setattr(cfg, name, val)
        validate(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ModelError, ValueError, ArithmeticError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
