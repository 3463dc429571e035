"""Sweep orchestration, persistence, and rate fitting.

Determinism contract: every trial draws from a stream keyed by
(master seed, grid index, trial index), so results are independent of worker
count and scheduling. Records are canonically sorted by (grid_value, seed).
Wall-clock time is inherently non-reproducible, so two CSVs are written:
``records.csv`` with measured timings and ``records.canonical.csv`` with the
wall_ms column zeroed; the canonical file is the byte-identity artifact.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .analysis import (
    default_window,
    effective_dimension,
    empirical_rsc,
    local_mean_width_mc,
    mean_width_mc,
    small_ball_q,
)
from .config import (
    ExperimentConfig,
    TrialSpec,
    build_corruption,
    build_covariance,
    build_loss,
    build_model,
    build_set,
    build_x0,
    validate_config,
)
from .core import RngStream, sample_ensemble
from .errors import ConfigInvalid, NoRoot
from .estimator import TrialRecord, run_trial
from .losses import Square
from .model_params import mean_abs_output, resolve_params
from .observations import make_observation_set
from .signal_sets import project

CSV_HEADER = ("grid_value,seed,m,n,eps,mu,sigma_sq,eta_sq,"
              "err_l2,err_dir,err_maha,objective,converged,wall_ms")


@dataclass(frozen=True)
class SweepResult:
    kind: str
    grid: tuple[float, ...]
    trials: int
    records: tuple[TrialRecord, ...]
    per_point: tuple[dict, ...]
    slope: float | None
    slope_stderr: float | None
    n_incompatible: int
    n_not_converged: int


def fit_rate(grid_values, median_errors) -> tuple[float, float]:
    """OLS slope of log(median error) against log(grid value), with std error."""
    x = np.log(np.asarray(grid_values, dtype=float))
    y = np.asarray(median_errors, dtype=float)
    if len(x) < 4:
        raise ValueError("rate fit needs at least 4 grid points")
    if np.any(y <= 0):
        raise ValueError("rate fit needs positive median errors")
    y = np.log(y)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ y) / sxx
    resid = y - (y.mean() + slope * xc)
    dof = max(len(x) - 2, 1)
    stderr = math.sqrt(float(resid @ resid) / dof / sxx)
    return slope, stderr


def _spec_for_grid(kind: str, trial: TrialSpec, grid_value: float) -> TrialSpec:
    if kind == "sweep-m":
        return replace(trial, m=int(round(grid_value)))
    if kind == "sweep-tau":
        return replace(trial, corruption_cfg={"kind": "bit_flips", "tau": int(round(grid_value))})
    if kind == "sweep-condition":
        cov_kind = trial.covariance_cfg.get("kind", "identity")
        if cov_kind not in ("diag_condition", "rotated_condition"):
            cov_kind = "rotated_condition"
        return replace(trial, covariance_cfg={"kind": cov_kind, "cond": float(grid_value)})
    raise ConfigInvalid(f"kind: {kind!r} is not a sweep")


def _run_one(args) -> TrialRecord:
    kind, trial, seed, grid_index, grid_value, trial_index = args
    spec = _spec_for_grid(kind, trial, grid_value) if kind != "estimate" else trial
    rng = RngStream(seed, (grid_index, trial_index))
    return run_trial(spec, rng, grid_value=grid_value, seed_label=trial_index)


def _aggregate(kind: str, grid, trials, records: list[TrialRecord]) -> SweepResult:
    records = sorted(records, key=lambda r: (r.grid_value, r.seed))
    per_point = []
    for gi, g in enumerate(grid):
        rs = [r for r in records if r.grid_value == g]
        errs = np.array([r.err_l2 for r in rs])
        point = {
            "grid_value": g,
            "n_records": len(rs),
            "median_err_l2": float(np.median(errs)),
            "q25_err_l2": float(np.percentile(errs, 25)),
            "q75_err_l2": float(np.percentile(errs, 75)),
            "median_err_dir": float(np.nanmedian([r.err_dir for r in rs])),
            "median_err_maha": float(np.median([r.err_maha for r in rs])),
            "median_eps": float(np.median([r.eps for r in rs])),
            "n_not_converged": sum(1 for r in rs if not r.converged),
            "median_wall_ms": float(np.median([r.wall_ms for r in rs])),
        }
        per_point.append(point)
    slope = stderr = None
    medians = [p["median_err_l2"] for p in per_point]
    if kind == "sweep-m" and len(grid) >= 4 and all(v > 0 for v in medians):
        slope, stderr = fit_rate(grid, medians)
    return SweepResult(
        kind=kind, grid=tuple(grid), trials=trials, records=tuple(records),
        per_point=tuple(per_point), slope=slope, slope_stderr=stderr,
        n_incompatible=0,
        n_not_converged=sum(1 for r in records if not r.converged),
    )


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def record_csv_rows(records, zero_wall: bool = False) -> str:
    lines = [CSV_HEADER]
    for r in sorted(records, key=lambda r: (r.grid_value, r.seed)):
        vals = [r.grid_value, r.seed, r.m, r.n, r.eps, r.mu, r.sigma_sq, r.eta_sq,
                r.err_l2, r.err_dir, r.err_maha, r.objective, r.converged,
                0.0 if zero_wall else r.wall_ms]
        lines.append(",".join(_fmt(v) for v in vals))
    return "\n".join(lines) + "\n"


def _write_artifacts(config: ExperimentConfig, result: SweepResult, raw_cfg: dict | None):
    out = config.out
    if out is None:
        return
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "records.csv"), "w") as fh:
        fh.write(record_csv_rows(result.records))
    with open(os.path.join(out, "records.canonical.csv"), "w") as fh:
        fh.write(record_csv_rows(result.records, zero_wall=True))
    agg = {
        "kind": result.kind,
        "grid": list(result.grid),
        "trials": result.trials,
        "per_point": list(result.per_point),
        "slope": result.slope,
        "slope_stderr": result.slope_stderr,
        "n_incompatible": result.n_incompatible,
        "n_not_converged": result.n_not_converged,
    }
    with open(os.path.join(out, "aggregates.json"), "w") as fh:
        json.dump(agg, fh, indent=2, sort_keys=True)
    if raw_cfg is not None:
        with open(os.path.join(out, "config.json"), "w") as fh:
            json.dump(raw_cfg, fh, indent=2, sort_keys=True)
    if config.plot:
        _write_svg_chart(result, os.path.join(out, "chart.svg"))


def _write_svg_chart(result: SweepResult, path: str):
    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    xs = [p["grid_value"] for p in result.per_point]
    ys = [p["median_err_l2"] for p in result.per_point]
    lo = [p["q25_err_l2"] for p in result.per_point]
    hi = [p["q75_err_l2"] for p in result.per_point]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(xs, ys, "o-", label="median error")
    ax.fill_between(xs, lo, hi, alpha=0.25, label="interquartile")
    ax.set_xlabel(result.kind.replace("sweep-", ""))
    ax.set_ylabel("error to scaled target")
    if result.slope is not None:
        ax.set_title(f"log-log slope {result.slope:.3f}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def run_sweep(config: ExperimentConfig, workers: int = 1,
              raw_cfg: dict | None = None) -> SweepResult:
    trial = config.trial
    grid = config.grid if config.kind != "estimate" else (float(trial.m),)
    # An incompatible pair is a population-level property: detect it once up
    # front instead of failing in every worker.
    resolve_params(build_loss(trial.loss_cfg), build_model(trial.model_cfg))
    tasks = [(config.kind, trial, config.seed, gi, g, ti)
             for gi, g in enumerate(grid) for ti in range(config.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_one, tasks, chunksize=8))
    else:
        records = [_run_one(t) for t in tasks]
    result = _aggregate(config.kind, grid, config.trials, records)
    _write_artifacts(config, result, raw_cfg)
    return result


# ---------------------------------------------------------------------------
# diagnostic experiment kinds


def _trial_context(config: ExperimentConfig):
    """Build (loss, model, set, factor, x0, base, ensemble, obs) for diagnostics."""
    trial = config.trial
    rng = RngStream(config.seed, (0, 0))
    loss = build_loss(trial.loss_cfg)
    model = build_model(trial.model_cfg)
    factor = build_covariance(trial.covariance_cfg, trial.n, rng.child(0))
    x0 = build_x0(trial.x0_cfg, trial.n, rng.child(1))
    x0 = x0 / factor.whiten_metric(x0)
    base_scaling = "solved_mu"
    try:
        params = resolve_params(loss, model)
    except NoRoot:
        # The pair has no population scaling; fall back to the square-loss
        # correlation so curvature diagnostics still have a sensible base point.
        params = resolve_params(Square(), model)
        base_scaling = "square_mu_fallback"
    set_ = build_set(trial.set_cfg, trial.n, mu=params.mu, x0=x0,
                     dilation=trial.dilation, rng=rng.child(5))
    ensemble = sample_ensemble(trial.m, factor, rng.child(2))
    obs = make_observation_set(model, ensemble, x0, build_corruption(trial.corruption_cfg),
                               rng.child(3))
    return loss, model, set_, factor, x0, params, base_scaling, ensemble, obs, rng


def run_modelparams(config: ExperimentConfig, raw_cfg: dict | None = None) -> dict:
    if config.trial is not None:
        loss = build_loss(config.trial.loss_cfg)
        model = build_model(config.trial.model_cfg)
    else:
        loss = build_loss(raw_cfg["loss"])
        model = build_model(raw_cfg["model"])
    params = resolve_params(loss, model)
    return {
        "mu": params.mu,
        "sigma_sq": params.sigma_sq,
        "eta_sq": params.eta_sq,
        "method": params.method,
        "stderr": params.stderr,
    }


def run_meanwidth(config: ExperimentConfig) -> dict:
    rng = RngStream(config.seed, (7,))
    if config.trial is not None:
        loss = build_loss(config.trial.loss_cfg)
        model = build_model(config.trial.model_cfg)
        params = resolve_params(loss, model)
        x0 = build_x0(config.trial.x0_cfg, config.trial.n, rng.child(1))
        x0 = x0 / np.linalg.norm(x0)
        set_ = build_set(config.trial.set_cfg, config.trial.n, mu=params.mu, x0=x0,
                         dilation=config.trial.dilation, rng=rng.child(0))
        default_center = params.mu * x0
    else:
        n = config.n
        if n is None:
            raise ConfigInvalid("n: required for meanwidth without a trial")
        set_ = build_set(config.set_cfg, n, rng=rng.child(0))
        default_center = None
    record: dict = {"samples": config.samples}
    if config.t is not None:
        center = (np.asarray(config.center, dtype=float) if config.center is not None
                  else default_center)
        if center is None:
            center = project(set_, np.zeros(set_.dim)).point
        width = local_mean_width_mc(set_, center, config.t, config.samples, rng.child(2))
    else:
        width = mean_width_mc(set_, config.samples, rng.child(2))
    dim = effective_dimension(width)
    record.update({
        "mean": width.mean, "std_error": width.std_error, "scale": width.scale,
        "effective_dim": dim.value, "effective_dim_std_error": dim.std_error,
    })
    return record


def run_rsc(config: ExperimentConfig) -> dict:
    if config.t is None:
        raise ConfigInvalid("t: required for rsc")
    loss, model, set_, factor, x0, params, base_scaling, ensemble, obs, rng = \
        _trial_context(config)
    base = params.mu * x0
    report = empirical_rsc(loss, ensemble, obs.ytilde, set_, base, config.t,
                           n_points=max(config.samples, 100), rng=rng.child(9))
    return {
        "scale": report.scale,
        "samples": report.samples,
        "min_ratio": report.min_ratio,
        "mean_ratio": report.mean_ratio,
        "violating_points": report.violating_points,
        "base_scaling": base_scaling,
        "mu": params.mu,
    }


def run_smallball(config: ExperimentConfig) -> dict:
    if config.t is None:
        raise ConfigInvalid("t: required for smallball")
    loss, model, set_, factor, x0, params, base_scaling, ensemble, obs, rng = \
        _trial_context(config)
    base = params.mu * x0
    eps_inf = float(np.max(np.abs(obs.y - obs.ytilde)))
    m_win, n_win = config.m_window, config.n_window
    if m_win is None or n_win is None:
        auto_m, auto_n = default_window(config.t, params.mu, mean_abs_output(model), eps_inf)
        m_win = auto_m if m_win is None else m_win
        n_win = auto_n if n_win is None else n_win
    # the tail event has probability ~1e-4 at the minimal window, so the
    # Gaussian sample floor is high enough to see it
    est = small_ball_q(set_, base, x0, config.t, m_win, n_win, model, eps_inf,
                       h_samples=200, g_samples=max(config.samples, 200_000),
                       rng=rng.child(11))
    return {
        "q_hat": est.q_hat,
        "q_hat_soft": est.q_hat_soft,
        "t": est.t,
        "M": est.m_window,
        "N": est.n_window if math.isfinite(est.n_window) else "inf",
        "h_samples": est.h_samples,
        "g_samples": est.g_samples,
        "eps_inf": eps_inf,
        "base_scaling": base_scaling,
    }


def run_config(raw_cfg: dict, workers: int = 1):
    """Validate and dispatch an experiment config; returns the result object."""
    config = validate_config(raw_cfg)
    if config.kind in ("estimate", "sweep-m", "sweep-tau", "sweep-condition"):
        return run_sweep(config, workers=workers, raw_cfg=raw_cfg)
    if config.kind == "modelparams":
        return run_modelparams(config, raw_cfg)
    if config.kind == "meanwidth":
        return run_meanwidth(config)
    if config.kind == "rsc":
        return run_rsc(config)
    if config.kind == "smallball":
        return run_smallball(config)
    raise ConfigInvalid(f"kind: unhandled experiment kind {config.kind!r}")
