"""Seeded benchmark runs with incremental, resumable CSV emission.

Each task maps one (config, seed) pair to one ResultRow:

* ``gmm``: generate a linear-Gaussian measurement of a lattice mixture,
  run the sampler until the output-sample target is met, and score the
  pooled outputs against exact posterior draws with the sliced
  Wasserstein distance.
* ``prior-recovery``: same pipeline with sigma_y forced to 1e6, scored
  against exact prior draws (the posterior degenerates to the prior).
* ``d3smc``: categorical chain prior observed through a uniform-noise
  channel, scored in total variation against the enumerated posterior.

Rows append to one CSV per config as soon as each seed finishes, and
seeds already present in the file are skipped on rerun, so interrupted
sweeps resume. Floats are printed with 17 significant digits; rerunning
an identical config reproduces the file byte-for-byte except wall_ms.
"""

import csv
import math
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import discrete as dd
from . import gmm
from . import measurement as ms
from .engine import DOMAIN_PROBLEM, substream
from .metrics import METRIC_PROJECTIONS, METRIC_SEED, empirical_joint, sliced_wasserstein, tv_distance
from .reconstruct import OdeSolve, Tweedie
from .sampler import DdsmcConfig, GmmDefault, PowerInterp, run_ddsmc
from .schedules import build_vp_schedule, with_times

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "CSV_COLUMNS",
    "SCHEMA_VERSION",
    "csv_path",
    "load_rows",
    "run_benchmark",
    "run_seed",
    "export_scatter",
    "collect_samples",
]

SCHEMA_VERSION = 1

TASKS = ("gmm", "d3smc", "prior-recovery")
RECONS = ("tweedie", "ode")
RHOS = ("gmm-default", "power")
LAMBDAS = ("matched", "daps")

CSV_COLUMNS = (
    "schema_version",
    "task",
    "seed",
    "d_x",
    "d_y",
    "eta",
    "recon",
    "n_particles",
    "steps",
    "sigma_y",
    "scale",
    "metric",
    "value",
    "wall_ms",
    "ess_min",
    "metric_seed",
    "n_projections",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one benchmark invocation depends on."""

    task: str = "gmm"
    d_x: int = 8
    d_y: int = 4
    eta: float = 1.0
    recon: str = "tweedie"
    n_particles: int = 256
    steps: int = 20
    seeds: tuple = tuple(range(20))
    sigma_y: float = 1.0
    scale: float = 8.0
    schedule_t: int = 1000
    rho: str = "gmm-default"
    lambda_mode: str = "matched"
    samples: int = 10240
    swd_projections: int = METRIC_PROJECTIONS
    output_dir: str = ""
    # d3smc-only knobs
    d3_vars: int = 4
    d3_cats: int = 3
    d3_steps: int = 10
    d3_beta_y: float = 0.6
    d3_coupling: float = 1.5
    d3_final_keep: float = 0.01

    def validate(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.task in ("gmm", "prior-recovery"):
            if self.d_x < 2:
                raise ValueError("d_x must be >= 2")
            if not 1 <= self.d_y <= self.d_x:
                raise ValueError("need 1 <= d_y <= d_x")
            if not 0.0 <= self.eta <= 1.0:
                raise ValueError("eta must lie in [0, 1]")
            if self.recon not in RECONS:
                raise ValueError(f"recon must be one of {RECONS}")
            if self.rho not in RHOS:
                raise ValueError(f"rho must be one of {RHOS}")
            if self.lambda_mode not in LAMBDAS:
                raise ValueError(f"lambda_mode must be one of {LAMBDAS}")
            if self.steps < 1 or self.schedule_t < 2:
                raise ValueError("need steps >= 1 and schedule_t >= 2")
            if self.sigma_y <= 0.0:
                raise ValueError("sigma_y must be positive")
            if self.scale <= 0.0:
                raise ValueError("scale must be positive")
        else:
            if self.d3_vars < 1 or self.d3_cats < 2:
                raise ValueError("need d3_vars >= 1 and d3_cats >= 2")
            if self.d3_steps < 1:
                raise ValueError("d3_steps must be >= 1")
            if not 0.0 <= self.d3_beta_y <= 1.0:
                raise ValueError("d3_beta_y must lie in [0, 1]")
            if not 0.0 < self.d3_final_keep < 1.0:
                raise ValueError("d3_final_keep must lie in (0, 1)")
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.swd_projections < 1:
            raise ValueError("swd_projections must be >= 1")
        return self


@dataclass(frozen=True)
class ResultRow:
    """One scored (config, seed) pair."""

    task: str
    seed: int
    d_x: int
    d_y: int
    eta: float
    recon: str
    n_particles: int
    steps: int
    sigma_y: float
    scale: float
    metric: str
    value: float
    wall_ms: float
    ess_min: float
    metric_seed: int = METRIC_SEED
    n_projections: int = METRIC_PROJECTIONS
    schema_version: int = SCHEMA_VERSION

    def as_csv(self):
        vals = []
        for col in CSV_COLUMNS:
            v = getattr(self, col)
            vals.append(f"{v:.17g}" if isinstance(v, float) else str(v))
        return vals


def _fmt_float(x):
    """Compact config-slug float: 0.5 -> '0.5', 1e6 -> '1e+06'."""
    return f"{x:g}"


def output_dir(cfg):
    """Explicit config value, else $DDSMC_OUTPUT_DIR, else the cwd."""
    return Path(cfg.output_dir or os.environ.get("DDSMC_OUTPUT_DIR", "."))


def csv_path(cfg):
    """One canonical file per config, so reruns resume it."""
    if cfg.task == "d3smc":
        slug = (
            f"d3smc-D{cfg.d3_vars}-d{cfg.d3_cats}-T{cfg.d3_steps}"
            f"-by{_fmt_float(cfg.d3_beta_y)}-N{cfg.n_particles}"
        )
    else:
        sy = cfg.sigma_y if cfg.task == "gmm" else 1e6
        slug = (
            f"{cfg.task}-dx{cfg.d_x}-dy{cfg.d_y}-{cfg.recon}"
            f"-eta{_fmt_float(cfg.eta)}-N{cfg.n_particles}-s{cfg.steps}"
            f"-scale{_fmt_float(cfg.scale)}-sy{_fmt_float(sy)}"
        )
    return output_dir(cfg) / f"{slug}.csv"


def load_rows(path):
    """Rows of an existing CSV as dicts; [] when the file is missing."""
    path = Path(path)
    if not path.exists():
        return []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is not None and tuple(reader.fieldnames) != CSV_COLUMNS:
            raise ValueError(
                f"{path}: unexpected CSV header {reader.fieldnames!r}; "
                f"expected {list(CSV_COLUMNS)!r}"
            )
        return list(reader)


def _append_row(path, row):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fresh = not path.exists()
    with path.open("a", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if fresh:
            writer.writerow(CSV_COLUMNS)
        writer.writerow(row.as_csv())


def _schedule(cfg):
    return with_times(build_vp_schedule(cfg.schedule_t), cfg.steps)


def _sampler_config(cfg, sched):
    recon = Tweedie() if cfg.recon == "tweedie" else OdeSolve()
    rho = GmmDefault() if cfg.rho == "gmm-default" else PowerInterp()
    return DdsmcConfig(
        sched=sched,
        recon=recon,
        eta=cfg.eta,
        rho=rho,
        n_particles=cfg.n_particles,
        lambda_mode=cfg.lambda_mode,
    )


def collect_samples(cfg, seed):
    """Pooled unweighted sampler outputs for one seed: (samples, d_x).

    Runs ceil(samples / N) independent runs and resamples each run's final
    ensemble to N outputs. Also returns the run result for diagnostics.
    """
    sigma_y = cfg.sigma_y if cfg.task == "gmm" else 1e6
    prob = gmm.generate_problem(
        cfg.d_x, cfg.d_y, seed=seed, scale=cfg.scale, sigma_y=sigma_y
    )
    w = ms.whiten(prob.meas, prob.y)
    sched = _schedule(cfg)
    score = gmm.gmm_score_source(gmm.whitened_prior(prob.prior, w), sched)
    runs = math.ceil(cfg.samples / cfg.n_particles)
    res = run_ddsmc(score, w, _sampler_config(cfg, sched), seed=seed, runs=runs)
    out = res.resampled_outputs().reshape(-1, cfg.d_x)[: cfg.samples]
    return out, prob, res


def _run_continuous_seed(cfg, seed):
    t0 = time.perf_counter()
    out, prob, res = collect_samples(cfg, seed)
    if cfg.task == "gmm":
        ref = gmm.gmm_exact_posterior_sample(prob, cfg.samples, seed=seed)
    else:
        rng = substream(seed, DOMAIN_PROBLEM, 2)
        ref = prob.prior.sample(cfg.samples, rng)
    value = sliced_wasserstein(out, ref, n_projections=cfg.swd_projections)
    wall_ms = 1e3 * (time.perf_counter() - t0)
    return ResultRow(
        task=cfg.task,
        seed=seed,
        d_x=cfg.d_x,
        d_y=cfg.d_y,
        eta=cfg.eta,
        recon=cfg.recon,
        n_particles=cfg.n_particles,
        steps=cfg.steps,
        sigma_y=cfg.sigma_y if cfg.task == "gmm" else 1e6,
        scale=cfg.scale,
        metric="swd",
        value=float(value),
        wall_ms=wall_ms,
        ess_min=float(res.trace["ess"].min()),
        n_projections=cfg.swd_projections,
    )


def d3smc_problem(cfg, seed):
    """Prior, observation, and channel for one discrete seed."""
    prior = dd.potts_chain_prior(cfg.d3_vars, cfg.d3_cats, coupling=cfg.d3_coupling)
    ykern = dd.UniformKernel(cfg.d3_cats, cfg.d3_beta_y)
    rng = substream(seed, DOMAIN_PROBLEM, 0)
    x_true = prior.sample(1, rng)[0]
    channel = ykern.as_matrix()
    y = np.array([rng.choice(cfg.d3_cats, p=channel[:, s]) for s in x_true])
    return prior, y, ykern


def _run_d3smc_seed(cfg, seed):
    t0 = time.perf_counter()
    prior, y, ykern = d3smc_problem(cfg, seed)
    betas = dd.geometric_betas(cfg.d3_steps, final_keep=cfg.d3_final_keep)
    runs = math.ceil(cfg.samples / cfg.n_particles)
    res = dd.run_d3smc(
        prior, betas, y, ykern, n_particles=cfg.n_particles, seed=seed, runs=runs
    )
    out = res.resampled_outputs().reshape(-1, cfg.d3_vars)[: cfg.samples]
    emp = empirical_joint(out, prior.grid)
    ref = dd.brute_force_posterior(prior, y, ykern)
    value = tv_distance(emp, ref)
    wall_ms = 1e3 * (time.perf_counter() - t0)
    return ResultRow(
        task=cfg.task,
        seed=seed,
        d_x=cfg.d3_vars,
        d_y=cfg.d3_vars,
        eta=0.0,
        recon="exact",
        n_particles=cfg.n_particles,
        steps=cfg.d3_steps,
        sigma_y=cfg.d3_beta_y,
        scale=cfg.d3_coupling,
        metric="tv",
        value=float(value),
        wall_ms=wall_ms,
        ess_min=float(res.trace["ess"].min()),
        n_projections=0,
    )


def run_seed(cfg, seed):
    """One ResultRow for (cfg, seed); pure compute, no IO."""
    cfg.validate()
    if cfg.task == "d3smc":
        return _run_d3smc_seed(cfg, seed)
    return _run_continuous_seed(cfg, seed)


def run_benchmark(cfg, log=None):
    """All rows for cfg.seeds, resuming any that the CSV already holds."""
    cfg.validate()
    path = csv_path(cfg)
    done = {int(r["seed"]): r for r in load_rows(path)}
    rows = []
    for seed in cfg.seeds:
        if seed in done:
            rows.append(done[seed])
            continue
        row = run_seed(cfg, seed)
        _append_row(path, row)
        rows.append(dict(zip(CSV_COLUMNS, row.as_csv())))
        if log is not None:
            log(f"seed {seed}: {row.metric} = {row.value:.4f} ({row.wall_ms:.0f} ms)")
    return rows, path


def mean_value(rows):
    """Mean of the metric column over result rows (dicts or ResultRows)."""
    vals = [float(r["value"]) if isinstance(r, dict) else r.value for r in rows]
    return float(np.mean(vals))


def export_scatter(samples, dims, path):
    """Two selected coordinates as a two-column text file for plotting."""
    samples = np.asarray(samples)
    if samples.ndim != 2:
        raise ValueError("samples must be 2-D")
    i, j = dims
    d = samples.shape[1]
    if not (0 <= i < d and 0 <= j < d):
        raise ValueError(f"dims {dims} out of range for d={d}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for row in samples:
            fh.write(f"{row[i]:.17g} {row[j]:.17g}\n")
    return path
