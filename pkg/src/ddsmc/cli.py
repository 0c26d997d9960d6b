"""Command-line front end for the benchmark harness.

Subcommands
-----------
gmm-bench    posterior-sampling benchmark against the exact mixture posterior
prior-check  prior-recovery benchmark (sigma_y = 1e6, scored against the prior)
d3smc-bench  discrete-sampler benchmark against the enumerated posterior
sample       draw posterior samples for one seed and write them to a text file

Option values resolve in increasing precedence: built-in defaults, flat
keys in the --config YAML file, keys under the file section named after
the subcommand, then explicit command-line flags. The default output
directory is $DDSMC_OUTPUT_DIR when set, else the working directory.

With --check the command exits 0 only if the configured bounds hold
(--min-mean / --max-mean on the mean metric), else prints a diagnostic
and exits 1.
"""

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import yaml

from .bench import ExperimentConfig, collect_samples, csv_path, export_scatter, mean_value, run_benchmark

__all__ = ["main", "build_parser", "parse_seeds"]

_CFG_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}

# (flag, dest, type, help) shared by every benchmark subcommand
_COMMON = [
    ("--seeds", "seeds", str, "seeds to run: '0-19', '3', or '0,2,5'"),
    ("--n-particles", "n_particles", int, "particles per run"),
    ("--samples", "samples", int, "pooled output samples per seed"),
    ("--output-dir", "output_dir", str, "where CSVs go (default $DDSMC_OUTPUT_DIR or '.')"),
]

_CONTINUOUS = [
    ("--d-x", "d_x", int, "state dimension"),
    ("--d-y", "d_y", int, "observation dimension"),
    ("--eta", "eta", float, "stochasticity in [0, 1]"),
    ("--recon", "recon", str, "denoiser: tweedie | ode"),
    ("--steps", "steps", int, "sampling steps"),
    ("--schedule-t", "schedule_t", int, "fine schedule length"),
    ("--scale", "scale", float, "prior mode-lattice spacing"),
    ("--rho", "rho", str, "decoupling schedule: gmm-default | power"),
    ("--lambda-mode", "lambda_mode", str, "proposal noise: matched | daps"),
    ("--swd-projections", "swd_projections", int, "sliced-Wasserstein projections"),
]

_DISCRETE = [
    ("--d3-vars", "d3_vars", int, "number of categorical variables"),
    ("--d3-cats", "d3_cats", int, "categories per variable"),
    ("--d3-steps", "d3_steps", int, "noising steps"),
    ("--d3-beta-y", "d3_beta_y", float, "observation-channel keep probability"),
    ("--d3-coupling", "d3_coupling", float, "chain-prior coupling strength"),
    ("--d3-final-keep", "d3_final_keep", float, "keep probability left at the final time"),
]


def parse_seeds(spec):
    """'0-19' -> (0..19); '0,2,5' -> (0, 2, 5); '7' -> (7,)."""
    if isinstance(spec, (list, tuple)):
        return tuple(int(s) for s in spec)
    spec = str(spec).strip()
    if "-" in spec and "," not in spec:
        lo, hi = spec.split("-", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(tok) for tok in spec.split(",") if tok.strip())


def _add_flags(sub, rows):
    for flag, dest, typ, help_ in rows:
        sub.add_argument(flag, dest=dest, type=typ, default=None, help=help_)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ddsmc",
        description="Benchmarks for SMC sampling from diffusion-prior posteriors.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    def bench_sub(name, help_, rows):
        sub = subs.add_parser(name, help=help_)
        sub.add_argument("--config", type=str, default=None, help="YAML config file")
        _add_flags(sub, _COMMON + rows)
        sub.add_argument("--check", action="store_true", help="verify bounds; exit 1 on failure")
        sub.add_argument("--min-mean", type=float, default=None, help="lower bound for --check")
        sub.add_argument("--max-mean", type=float, default=None, help="upper bound for --check")
        sub.add_argument("--quiet", action="store_true", help="suppress per-seed progress")
        return sub

    bench_sub("gmm-bench", "sample mixture posteriors, score vs exact draws", _CONTINUOUS + [("--sigma-y", "sigma_y", float, "observation noise std")])
    bench_sub("prior-check", "run with an uninformative observation, score vs the prior", _CONTINUOUS)
    bench_sub("d3smc-bench", "discrete sampler vs enumerated posterior", _DISCRETE)

    sub = subs.add_parser("sample", help="write posterior samples for one seed")
    sub.add_argument("--config", type=str, default=None, help="YAML config file")
    _add_flags(sub, _COMMON + _CONTINUOUS + [("--sigma-y", "sigma_y", float, "observation noise std")])
    sub.add_argument("--seed", type=int, default=0, help="problem/run seed")
    sub.add_argument("--dims", type=str, default=None, help="'i,j': write only these two coordinates")
    sub.add_argument("--out", type=str, default=None, help="output text file")
    sub.add_argument("--quiet", action="store_true", help="suppress progress output")
    return parser


_TASK_DEFAULTS = {
    "gmm-bench": {"task": "gmm"},
    "prior-check": {
        "task": "prior-recovery",
        "d_x": 2,
        "d_y": 2,
        "eta": 0.5,
        "recon": "ode",
        "scale": 1.0,
        "seeds": tuple(range(5)),
    },
    "d3smc-bench": {"task": "d3smc", "samples": 102400, "seeds": tuple(range(5))},
    "sample": {"task": "gmm"},
}


def _load_config_file(path, command):
    """Flat keys overlaid by the section named after the subcommand."""
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: top level must be a mapping")
    flat = {k: v for k, v in data.items() if k in _CFG_FIELDS}
    section = data.get(command, {})
    if section and not isinstance(section, dict):
        raise ValueError(f"{path}: section {command!r} must be a mapping")
    for k, v in (section or {}).items():
        if k not in _CFG_FIELDS:
            raise ValueError(f"{path}: unknown key {k!r} in section {command!r}")
        flat[k] = v
    unknown = set(data) - _CFG_FIELDS - {c for c in _TASK_DEFAULTS}
    if unknown:
        raise ValueError(f"{path}: unknown keys {sorted(unknown)!r}")
    return flat


def _build_config(args):
    merged = dict(_TASK_DEFAULTS[args.command])
    if args.config:
        merged.update(_load_config_file(args.config, args.command))
    for k, v in vars(args).items():
        if k in _CFG_FIELDS and v is not None:
            merged[k] = v
    if "seeds" in merged:
        merged["seeds"] = parse_seeds(merged["seeds"])
    return ExperimentConfig(**merged).validate()


def _run_bench(args):
    cfg = _build_config(args)
    log = None if args.quiet else (lambda msg: print(msg, flush=True))
    rows, path = run_benchmark(cfg, log=log)
    mean = mean_value(rows)
    metric = rows[0]["metric"] if rows else "value"
    print(f"{len(rows)} seeds -> mean {metric} = {mean:.6g} ({path})")
    if args.check:
        if args.min_mean is None and args.max_mean is None:
            print("--check given but no --min-mean/--max-mean bound", file=sys.stderr)
            return 2
        if args.min_mean is not None and not mean >= args.min_mean:
            print(f"CHECK FAILED: mean {metric} {mean:.6g} < min {args.min_mean:g}", file=sys.stderr)
            return 1
        if args.max_mean is not None and not mean <= args.max_mean:
            print(f"CHECK FAILED: mean {metric} {mean:.6g} > max {args.max_mean:g}", file=sys.stderr)
            return 1
        print("CHECK PASSED")
    return 0


def _run_sample(args):
    if "seeds" not in {k for k, v in vars(args).items() if v is not None}:
        args.seeds = str(args.seed)
    cfg = _build_config(args)
    out, _, _ = collect_samples(cfg, args.seed)
    if args.out:
        path = Path(args.out)
    else:
        stem = csv_path(cfg).stem
        path = csv_path(cfg).parent / f"samples-{stem}-seed{args.seed}.txt"
    if args.dims is not None:
        i, j = (int(tok) for tok in args.dims.split(","))
        export_scatter(out, (i, j), path)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as fh:
            for row in out:
                fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
    if not args.quiet:
        print(f"{out.shape[0]} samples -> {path}")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(format="%(message)s")
    if getattr(args, "quiet", False):
        logging.getLogger("ddsmc").setLevel(logging.ERROR)
    try:
        if args.command == "sample":
            return _run_sample(args)
        return _run_bench(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
