"""Command-line entry point: reproducible runs over portable feature files.

Subcommands: uda, sda-homo, sda-hetero, ablate, selftest. Flag values
override config-file values, which override the built-in defaults; the fully
resolved configuration is echoed into every report. Exit codes: 0 success,
2 configuration/usage, 3 data or file errors, 4 numerical failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, dataclass

import numpy as np

from .data import Dataset, load_features, load_labels, pca, save_labels, split_sda, zscore
from .errors import DataError, NumericsError
from .evaluation import Report, build_report, run_ablation, write_reports, write_summary_csv
from .figures import render_report_figures
from .semi import fit_sda_heterogeneous, fit_sda_homogeneous
from .solver import Hyperparams, fit_uda
from . import selftest as selftest_mod

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICS = 4

MODES = ("uda", "sda-homo", "sda-hetero", "ablate")

DEFAULTS: dict = {
    "alpha": 0.1,
    "beta": 0.1,
    "gamma": 5.0,
    "dim": 100,
    "k": 10,
    "max_iter": 10,
    "tol": 1e-6,
    "variant": "full",
    "variants": "full,cm,rm,pa,ds,op",
    "pca": None,
    "zscore": True,
    "per_class": 3,
    "seed": 0,
    "out": "cmms-out",
    "format": "auto",
    "task": None,
    "source": None,
    "source_labels": None,
    "target": None,
    "target_labels": None,
}


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass
class RunConfig:
    """Fully resolved configuration of one run."""

    mode: str
    source: str
    source_labels: str
    target: str
    target_labels: str | None
    alpha: float
    beta: float
    gamma: float
    dim: int
    k: int
    max_iter: int
    tol: float
    variant: str
    variants: list[str]
    pca: int | None
    zscore: bool
    per_class: int
    seed: int
    out: str
    format: str
    task: str

    def hyperparams(self) -> Hyperparams:
        return Hyperparams(
            alpha=self.alpha,
            beta=self.beta,
            gamma=self.gamma,
            d=self.dim,
            k=self.k,
            max_iter=self.max_iter,
            tol=self.tol,
            variant=self.variant,
        )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cmms",
        description=(
            "Domain adaptation by class-centroid matching with adaptive "
            "local-manifold self-learning."
        ),
    )
    sub = parser.add_subparsers(dest="mode")
    for mode in MODES:
        p = sub.add_parser(mode, help=f"run {mode}")
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--source", help="source feature file (csv or bin)")
        p.add_argument("--source-labels", dest="source_labels", help="source label file")
        p.add_argument("--target", help="target feature file")
        p.add_argument("--target-labels", dest="target_labels", help="target label file")
        p.add_argument("--alpha", type=float)
        p.add_argument("--beta", type=float)
        p.add_argument("--gamma", type=float)
        p.add_argument("--dim", type=int, help="projected subspace dimensionality")
        p.add_argument("--k", type=int, help="neighborhood size")
        p.add_argument("--max-iter", dest="max_iter", type=int)
        p.add_argument("--tol", type=float)
        p.add_argument("--variant", choices=("full", "cm", "rm", "pa", "ds", "op"))
        p.add_argument("--variants", help="comma list of variants (ablate mode)")
        p.add_argument("--pca", type=int, help="PCA dimension applied before fitting")
        p.add_argument("--no-zscore", dest="no_zscore", action="store_true",
                       help="skip per-domain z-score standardization")
        p.add_argument("--per-class", dest="per_class", type=int,
                       help="labeled target samples per class (SDA modes)")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory for reports and figures")
        p.add_argument("--task", help="task name recorded in reports")
    sub.add_parser("selftest", help="run the built-in invariant suite on synthetic data")
    return parser


def parse_config(argv: list[str]) -> RunConfig | None:
    """Resolve CLI flags + optional config file + defaults into a RunConfig.

    Returns None for the selftest subcommand (it takes no configuration).
    """
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.mode is None:
        parser.print_usage(sys.stderr)
        raise ConfigError("a subcommand is required")
    if args.mode == "selftest":
        return None

    resolved = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                file_conf = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed config file: {exc}") from exc
        unknown = set(file_conf) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        resolved.update(file_conf)

    for key in DEFAULTS:
        cli_value = getattr(args, key, None)
        if cli_value is not None:
            resolved[key] = cli_value
    if getattr(args, "no_zscore", False):
        resolved["zscore"] = False

    for key in ("source", "source_labels", "target"):
        if not resolved[key]:
            raise ConfigError(f"--{key.replace('_', '-')} is required for mode {args.mode}")
    if args.mode in ("sda-homo", "sda-hetero", "ablate") and not resolved["target_labels"]:
        raise ConfigError(f"--target-labels is required for mode {args.mode}")

    variants = [v.strip() for v in str(resolved["variants"]).split(",") if v.strip()]
    task = resolved["task"] or (
        f"{os.path.basename(str(resolved['source']))}->"
        f"{os.path.basename(str(resolved['target']))}"
    )
    config = RunConfig(
        mode=args.mode,
        source=str(resolved["source"]),
        source_labels=str(resolved["source_labels"]),
        target=str(resolved["target"]),
        target_labels=resolved["target_labels"],
        alpha=float(resolved["alpha"]),
        beta=float(resolved["beta"]),
        gamma=float(resolved["gamma"]),
        dim=int(resolved["dim"]),
        k=int(resolved["k"]),
        max_iter=int(resolved["max_iter"]),
        tol=float(resolved["tol"]),
        variant=str(resolved["variant"]),
        variants=variants,
        pca=None if resolved["pca"] in (None, "") else int(resolved["pca"]),
        zscore=bool(resolved["zscore"]),
        per_class=int(resolved["per_class"]),
        seed=int(resolved["seed"]),
        out=str(resolved["out"]),
        format=str(resolved["format"]),
        task=task,
    )
    config.hyperparams().validate()
    if config.per_class < 0:
        raise ConfigError("per-class must be nonnegative")
    return config


def _file_format(path: str, declared: str) -> str:
    if declared != "auto":
        return declared
    return "bin" if path.endswith(".bin") else "csv"


def _load_domain(feat_path: str, label_path: str | None, fmt: str, name: str) -> Dataset:
    d = load_features(feat_path, _file_format(feat_path, fmt), name=name)
    if label_path:
        labels = load_labels(label_path)
        d = d.with_labels(labels)
    return d


def _preprocess(config: RunConfig, source: Dataset, target: Dataset) -> tuple[Dataset, Dataset]:
    """Per-domain z-scoring, then PCA: joint over stacked rows when the
    domains share a feature space, per-domain in the heterogeneous mode."""
    if config.zscore:
        source, target = zscore(source), zscore(target)
    if config.pca is not None:
        if config.mode == "sda-hetero":
            source, _ = pca(source, min(config.pca, min(source.n_samples - 1, source.n_dims)))
            target, _ = pca(target, min(config.pca, min(target.n_samples - 1, target.n_dims)))
        else:
            stacked = Dataset(
                np.vstack([source.features, target.features]), name="joint"
            )
            out_dim = min(config.pca, min(stacked.n_samples - 1, stacked.n_dims))
            reduced, _ = pca(stacked, out_dim)
            source = Dataset(reduced.features[: source.n_samples], source.labels, source.name)
            target = Dataset(reduced.features[source.n_samples :], target.labels, target.name)
    return source, target


def _echo_config(config: RunConfig) -> dict:
    payload = asdict(config)
    return payload


def run(config: RunConfig) -> int:
    """Execute one configured run and write reports, predictions and figures."""
    os.makedirs(config.out, exist_ok=True)
    source = _load_domain(config.source, config.source_labels, config.format, "source")
    target = _load_domain(config.target, config.target_labels, config.format, "target")
    source, target = _preprocess(config, source, target)
    hyper = config.hyperparams()
    reports: list[Report] = []
    config_echo = _echo_config(config)

    if config.mode == "uda":
        start = time.perf_counter()
        state, pred = fit_uda(source, target, hyper)
        elapsed = time.perf_counter() - start
        reports.append(
            build_report(
                config.task, "uda", config.variant, pred, target.labels,
                source.class_values, state.iteration, state.objective_trace,
                hyper, config_echo, config.seed, elapsed,
            )
        )
        save_labels(pred, os.path.join(config.out, "predictions.txt"))
    elif config.mode == "ablate":
        reports = run_ablation(
            source, target, hyper, config.variants, task=config.task,
            config=config_echo, seed=config.seed,
        )
    else:
        split = split_sda(target, config.per_class, config.seed)
        start = time.perf_counter()
        if config.mode == "sda-homo":
            semi, pred = fit_sda_homogeneous(source, split, hyper)
        else:
            semi, pred = fit_sda_heterogeneous(source, split, hyper)
        elapsed = time.perf_counter() - start
        reports.append(
            build_report(
                config.task, config.mode, config.variant, pred,
                split.unlabeled.labels, source.class_values,
                semi.base.iteration, semi.base.objective_trace,
                hyper, config_echo, config.seed, elapsed,
            )
        )
        save_labels(pred, os.path.join(config.out, "predictions.txt"))
        np.savetxt(
            os.path.join(config.out, "unlabeled_indices.txt"),
            split.unlabeled_indices, fmt="%d",
        )

    report_path = os.path.join(config.out, "report.jsonl")
    write_reports(reports, report_path)
    write_summary_csv(reports, os.path.join(config.out, "summary.csv"))
    for report in reports:
        stem = f"{config.mode}_{report.variant}" if len(reports) > 1 else config.mode
        render_report_figures(report, config.out, stem)

    print(f"task: {config.task}")
    header = f"{'variant':<8} {'accuracy':>9} {'mean/cls':>9} {'iters':>6} {'time(s)':>8}"
    print(header)
    print("-" * len(header))
    for report in reports:
        acc = "n/a" if report.accuracy is None else f"{report.accuracy:8.2f}%"
        mpc = "n/a" if report.mean_per_class is None else f"{report.mean_per_class:8.2f}%"
        print(f"{report.variant:<8} {acc:>9} {mpc:>9} {report.iterations_run:>6} "
              f"{report.wall_time_s:>8.2f}")
    print(f"reports written to {config.out}")
    return EXIT_OK


def _thread_limit():
    value = os.environ.get("CMMS_THREADS")
    if not value:
        return None
    try:
        limit = int(value)
    except ValueError:
        raise ConfigError(f"CMMS_THREADS must be an integer, got {value!r}") from None
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return None
    return threadpool_limits(limits=limit)


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = parse_config(argv)
        if config is None:
            return selftest_mod.run_selftest()
        limiter = _thread_limit()
        if limiter is None:
            return run(config)
        with limiter:
            return run(config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICS


if __name__ == "__main__":
    sys.exit(main())
