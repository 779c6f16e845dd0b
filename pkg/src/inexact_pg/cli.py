"""Command-line experiment runner.

Verbs: ``solve``, ``grid``, ``compare``, ``lambda-min``, ``profile``.
Settings come from an optional JSON file with flat keys (see
:class:`ExperimentConfig`); command-line flags override the file.
Relative dataset names are looked up in ``$INEXACT_PG_DATA``.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .data_io import load_libsvm
from .groups import generate_groups, set_weights
from .losses import LogisticLoss
from .metrics import compare_summaries, performance_profile
from .outer import OuterConfig, atomic_writer, find_lambda_min, solve
from .synthetic import synthetic_logistic

DATA_ENV = "INEXACT_PG_DATA"
EXIT_SOLVED, EXIT_UNSOLVED, EXIT_USAGE = 0, 1, 2


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "synthetic"
    scaling: str = "maxabs"
    n_features: int | None = None
    synthetic_samples: int = 1000
    synthetic_features: int = 100
    synthetic_density: float = 0.2
    seed: int = 0
    ratio: float = 0.1
    grpsize: int = 10
    lam: float | None = None
    lam_fraction: float | None = 0.1
    option: str = "option1"
    gamma1: float = 0.2
    gamma2: float = 0.5
    C: float = 1000.0
    alpha_mode: str = "practical"
    schedule: str = "none"
    omega: float = 0.5
    psi: float = 0.5
    mu_f: float | None = None
    subsolver: str = "enhanced"
    eps_tol: float = 1e-5
    max_iters: int = 10_000
    max_time: float = 300.0
    inner_max_iter: int = 5000
    out_dir: str = "runs"
    # grid only
    datasets: tuple = ()
    ratios: tuple = (0.1, 0.2, 0.3)
    grpsizes: tuple = (10, 100)
    lam_fractions: tuple = (0.1, 0.01)
    options: tuple = ("option1", "option2", "option3")
    workers: int = 1
    repeats: int = 3

    def __post_init__(self):
        if self.lam is None and self.lam_fraction is None:
            raise ValueError("set either lam or lam_fraction")
        if self.lam is not None and not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.lam_fraction is not None and not self.lam_fraction > 0:
            raise ValueError("lam_fraction must be positive")
        if self.workers < 1 or self.repeats < 1:
            raise ValueError("workers and repeats must be >= 1")
        self.outer_config()  # validates the solver parameters

    def outer_config(self, option: str | None = None) -> OuterConfig:
        return OuterConfig(
            option=option or self.option, gamma1=self.gamma1, gamma2=self.gamma2, C=self.C,
            alpha_mode=self.alpha_mode, schedule=self.schedule, omega=self.omega,
            psi=self.psi, mu_f=self.mu_f, subsolver=self.subsolver, eps_tol=self.eps_tol,
            max_iters=self.max_iters, max_time=self.max_time, inner_max_iter=self.inner_max_iter,
        )


_TUPLE_KEYS = {f.name for f in fields(ExperimentConfig) if f.type == "tuple"}


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    values = {}
    if path:
        values.update(json.loads(Path(path).read_text()))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for k in _TUPLE_KEYS & set(values):
        values[k] = tuple(values[k])
    return ExperimentConfig(**values)


def resolve_dataset_path(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    base = os.environ.get(DATA_ENV)
    if base and not p.is_absolute():
        for cand in (name, name + ".txt", name + ".gz", name + ".bz2"):
            q = Path(base) / cand
            if q.exists():
                return q
    where = f" or in ${DATA_ENV}={base}" if base else f" (set ${DATA_ENV})"
    raise FileNotFoundError(f"dataset {name!r} not found{where}")


def load_dataset(cfg: ExperimentConfig, name: str | None = None):
    name = name or cfg.dataset
    if name == "synthetic" or name.startswith("synthetic:"):
        seed = int(name.split(":", 1)[1]) if ":" in name else cfg.seed
        return synthetic_logistic(
            cfg.synthetic_samples, cfg.synthetic_features, cfg.synthetic_density, seed=seed
        )
    return load_libsvm(resolve_dataset_path(name), cfg.n_features, cfg.scaling)


def instance_id(dataset: str, ratio: float, grpsize: int, lam_fraction) -> str:
    name = Path(dataset).name.replace(":", "-")
    return f"{name}_r{ratio:g}_g{grpsize}_l{lam_fraction:g}"


def run_single(cfg: ExperimentConfig, out_dir=None, stem=None, verbose=True):
    """One solve; writes ``<stem>.csv`` and ``<stem>.json``. Returns the record."""
    data = load_dataset(cfg)
    loss = LogisticLoss(data)
    gs0 = generate_groups(data.n_features, cfg.ratio, cfg.grpsize)
    outer = cfg.outer_config()
    if cfg.lam is not None:
        lam, lam_min = cfg.lam, None
    else:
        lam_min = find_lambda_min(loss, gs0, outer)
        lam = cfg.lam_fraction * lam_min
    x, rec = solve(loss, set_weights(gs0, lam), outer)
    rec.config = {**asdict(cfg), "lam_used": lam, "lam_min": lam_min}
    stem = stem or f"{instance_id(cfg.dataset, cfg.ratio, cfg.grpsize, cfg.lam_fraction or lam)}_{cfg.option}"
    rec.write(out_dir or cfg.out_dir, stem)
    if verbose:
        print(
            f"{stem}: status={rec.status} F={rec.F_final:.6f} zero={rec.groups_zero} "
            f"nonzero={rec.groups_nonzero} iters={rec.iters} time={rec.time_s:.2f}s"
        )
    return rec


def _grid_task(args):
    cfg, dataset, ratio, grpsize = args
    data = load_dataset(cfg, dataset)
    loss = LogisticLoss(data)
    gs0 = generate_groups(data.n_features, ratio, grpsize)
    lam_min = find_lambda_min(loss, gs0, cfg.outer_config())
    out = []
    for frac, option in itertools.product(cfg.lam_fractions, cfg.options):
        gs = set_weights(gs0, frac * lam_min)
        times = []
        for _ in range(cfg.repeats):
            x, rec = solve(loss, gs, cfg.outer_config(option))
            times.append(rec.time_s)
        rec.time_s = float(np.mean(times))
        rec.config = {
            **asdict(replace(cfg, dataset=dataset, ratio=ratio, grpsize=grpsize, lam=None,
                             lam_fraction=frac, option=option)),
            "lam_used": frac * lam_min, "lam_min": lam_min, "time_runs": times,
        }
        inst = instance_id(dataset, ratio, grpsize, frac)
        rec.write(Path(cfg.out_dir) / option, inst)
        out.append((inst, option, rec.status))
    return out


def run_grid(cfg: ExperimentConfig):
    """All (dataset, ratio, grpsize, lam_fraction, option) combinations.

    Writes ``<out_dir>/<option>/<instance>.{csv,json}`` plus a status
    table as ``status.txt`` and ``status.csv``. Returns the status table
    ``{option: {status: count}}``.
    """
    datasets = cfg.datasets or (cfg.dataset,)
    tasks = [(cfg, d, r, g) for d in datasets for r in cfg.ratios for g in cfg.grpsizes]
    if cfg.workers == 1:
        results = [_grid_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_grid_task, tasks))
    merged = sorted(item for chunk in results for item in chunk)
    statuses = ("solved", "iter_limit", "time_limit", "numerical_difficulties")
    table = {opt: dict.fromkeys(statuses, 0) for opt in cfg.options}
    for _, option, status in merged:
        table[option][status] += 1
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with atomic_writer(out / "status.csv") as fh:
        w = csv.writer(fh)
        w.writerow(["option", *statuses, "total"])
        for opt in cfg.options:
            w.writerow([opt, *table[opt].values(), sum(table[opt].values())])
    with atomic_writer(out / "status.txt") as fh:
        fh.write(format_status_table(table))
    return table


def format_status_table(table: dict) -> str:
    statuses = list(next(iter(table.values())))
    header = ["option", *statuses, "total"]
    rows = [[opt, *map(str, counts.values()), str(sum(counts.values()))] for opt, counts in table.items()]
    widths = [max(len(r[c]) for r in [header, *rows]) for c in range(len(header))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(r, widths)) for r in [header, *rows]]
    return "\n".join(lines) + "\n"


def read_summaries(directory) -> dict:
    return {
        p.stem: json.loads(p.read_text())
        for p in sorted(Path(directory).glob("*.json"))
    }


def profile_dirs(dir_i, dir_j):
    a, b = read_summaries(dir_i), read_summaries(dir_j)
    common = sorted(set(a) & set(b))
    return performance_profile(
        [a[p]["time_s"] for p in common],
        [b[p]["time_s"] for p in common],
        [a[p]["status"] == "solved" for p in common],
        [b[p]["status"] == "solved" for p in common],
        common,
    )


def write_profile_csv(prof, path) -> None:
    with atomic_writer(path) as fh:
        w = csv.writer(fh)
        w.writerow(["instance", "height", "failure"])
        for bar in prof.bars:
            w.writerow([bar.instance, repr(bar.height), int(bar.failure)])


def compare_dirs(dir_a, dir_b, out=None) -> dict:
    report = compare_summaries(read_summaries(dir_a), read_summaries(dir_b))
    prof = profile_dirs(dir_a, dir_b)
    report["profile_area"] = {"a": prof.area_i, "b": prof.area_j}
    if out:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        with atomic_writer(out / "comparison.json") as fh:
            json.dump(report, fh, indent=2)
        write_profile_csv(prof, out / "profile.csv")
    return report


def _add_config_flags(p):
    p.add_argument("--config", help="JSON file with flat ExperimentConfig keys")
    p.add_argument("--dataset", help="LIBSVM file, name under $%s, or 'synthetic[:seed]'" % DATA_ENV)
    p.add_argument("--scaling", choices=("maxabs", "standardize", "none"))
    p.add_argument("--n-features", type=int)
    p.add_argument("--seed", type=int, help="seed for synthetic data")
    p.add_argument("--synthetic-samples", type=int)
    p.add_argument("--synthetic-features", type=int)
    p.add_argument("--synthetic-density", type=float)
    p.add_argument("--ratio", type=float)
    p.add_argument("--grpsize", type=int)
    p.add_argument("--lam", type=float, help="absolute weight scale")
    p.add_argument("--lam-fraction", type=float, help="weight scale as a fraction of the smallest zero-solution scale")
    p.add_argument("--option", choices=("option1", "option2", "option3"))
    p.add_argument("--gamma1", type=float)
    p.add_argument("--gamma2", type=float)
    p.add_argument("--C", type=float)
    p.add_argument("--alpha-mode", choices=("faithful", "practical"))
    p.add_argument("--schedule", choices=("none", "strategy1", "strategy2"))
    p.add_argument("--omega", type=float)
    p.add_argument("--psi", type=float)
    p.add_argument("--mu-f", type=float)
    p.add_argument("--subsolver", choices=("enhanced", "pga"))
    p.add_argument("--eps-tol", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--max-time", type=float)
    p.add_argument("--inner-max-iter", type=int)
    p.add_argument("--out-dir")


def _split(cast):
    return lambda s: tuple(cast(v) for v in s.split(",") if v)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="inexact-pg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("solve", help="solve one instance")
    _add_config_flags(p)

    p = sub.add_parser("grid", help="run a grid of instances")
    _add_config_flags(p)
    p.add_argument("--datasets", type=_split(str))
    p.add_argument("--ratios", type=_split(float))
    p.add_argument("--grpsizes", type=_split(int))
    p.add_argument("--lam-fractions", type=_split(float))
    p.add_argument("--options", type=_split(str))
    p.add_argument("--workers", type=int)
    p.add_argument("--repeats", type=int)

    p = sub.add_parser("lambda-min", help="smallest weight scale with a zero solution")
    _add_config_flags(p)

    for verb, text in (("compare", "better/same/worse counts and profile"), ("profile", "performance-profile bars")):
        p = sub.add_parser(verb, help=text)
        p.add_argument("dir_a")
        p.add_argument("dir_b")
        p.add_argument("--out", help="directory for the report files")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verb in ("compare", "profile"):
        if args.verb == "compare":
            report = compare_dirs(args.dir_a, args.dir_b, args.out)
            print(json.dumps(report, indent=2))
        else:
            prof = profile_dirs(args.dir_a, args.dir_b)
            if args.out:
                Path(args.out).mkdir(parents=True, exist_ok=True)
                write_profile_csv(prof, Path(args.out) / "profile.csv")
            for bar in prof.bars:
                print(f"{bar.instance}\t{bar.height:+.4f}{' (failure)' if bar.failure else ''}")
            print(f"area a={prof.area_i:.4f} b={prof.area_j:.4f}")
        return EXIT_SOLVED

    overrides = {k: v for k, v in vars(args).items() if k not in ("verb", "config")}
    try:
        cfg = load_config(args.config, overrides)
    except (ValueError, TypeError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        if args.verb == "solve":
            rec = run_single(cfg)
            return EXIT_SOLVED if rec.status == "solved" else EXIT_UNSOLVED
        if args.verb == "lambda-min":
            data = load_dataset(cfg)
            gs0 = generate_groups(data.n_features, cfg.ratio, cfg.grpsize)
            lam_min = find_lambda_min(LogisticLoss(data), gs0, cfg.outer_config())
            print(repr(lam_min))
            return EXIT_SOLVED
        table = run_grid(cfg)
        print(format_status_table(table), end="")
        unsolved = sum(c for t in table.values() for s, c in t.items() if s != "solved")
        return EXIT_SOLVED if unsolved == 0 else EXIT_UNSOLVED
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
