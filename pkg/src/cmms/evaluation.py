"""Accuracy metrics, ablation orchestration, and structured result reports.

Reports serialize as JSON Lines (one document per task, schema_version field)
plus a CSV summary pivoting tasks against methods/variants. Plot-ready data
only; figure rendering lives on the CLI path.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import Dataset
from .errors import DataError
from .solver import Hyperparams, InitClassifier, fit_uda

SCHEMA_VERSION = 1


def accuracy(pred: np.ndarray, truth: np.ndarray) -> float:
    """Percentage of matching labels."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise DataError(f"length mismatch: {pred.shape} vs {truth.shape}")
    return 100.0 * float((pred == truth).mean())


def per_class_accuracy(
    pred: np.ndarray, truth: np.ndarray, class_values: np.ndarray
) -> np.ndarray:
    """Accuracy restricted to each truth class, in class_values order."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise DataError(f"length mismatch: {pred.shape} vs {truth.shape}")
    out = np.empty(len(class_values))
    for i, value in enumerate(class_values):
        mask = truth == value
        if not mask.any():
            raise DataError(f"class {value} absent from the truth labels")
        out[i] = 100.0 * float((pred[mask] == value).mean())
    return out


@dataclass
class Report:
    """Per-task result record; floats round-trip losslessly through JSON."""

    task: str
    mode: str
    variant: str
    accuracy: float | None
    per_class_accuracy: list[float] | None
    mean_per_class: float | None
    class_values: list[int]
    iterations_run: int
    objective_trace: list[float]
    hyperparams: dict
    config: dict
    seed: int | None
    wall_time_s: float
    schema_version: int = SCHEMA_VERSION

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "Report":
        payload = json.loads(line)
        if payload.get("schema_version") != SCHEMA_VERSION:
            raise DataError(
                f"unsupported report schema_version {payload.get('schema_version')}"
            )
        return cls(**payload)


def build_report(
    task: str,
    mode: str,
    variant: str,
    pred: np.ndarray,
    truth: np.ndarray | None,
    class_values: np.ndarray,
    iterations_run: int,
    objective_trace: list[float],
    hyper: Hyperparams,
    config: dict,
    seed: int | None,
    wall_time_s: float,
) -> Report:
    acc = pcls = mean_pcls = None
    if truth is not None:
        acc = accuracy(pred, truth)
        pcls = per_class_accuracy(pred, truth, class_values).tolist()
        mean_pcls = float(np.mean(pcls))
    return Report(
        task=task,
        mode=mode,
        variant=variant,
        accuracy=acc,
        per_class_accuracy=pcls,
        mean_per_class=mean_pcls,
        class_values=[int(v) for v in class_values],
        iterations_run=iterations_run,
        objective_trace=[float(v) for v in objective_trace],
        hyperparams={**hyper.__dict__},
        config=config,
        seed=seed,
        wall_time_s=wall_time_s,
    )


def write_reports(reports: list[Report], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for report in reports:
            fh.write(report.to_json())
            fh.write("\n")


def read_reports(path: str) -> list[Report]:
    reports = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                reports.append(Report.from_json(line))
    return reports


def write_summary_csv(reports: list[Report], path: str) -> None:
    """Summary table: rows = tasks, columns = methods/variants, cells = accuracy."""
    tasks: list[str] = []
    methods: list[str] = []
    cells: dict[tuple[str, str], float | None] = {}
    for r in reports:
        if r.task not in tasks:
            tasks.append(r.task)
        if r.variant not in methods:
            methods.append(r.variant)
        cells[(r.task, r.variant)] = r.accuracy
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["task"] + methods)
        for task in tasks:
            row: list[str] = [task]
            for method in methods:
                value = cells.get((task, method))
                row.append("" if value is None else f"{value:.4f}")
            writer.writerow(row)


def run_ablation(
    source: Dataset,
    target: Dataset,
    hyper: Hyperparams,
    variants: list[str],
    task: str = "ablation",
    config: dict | None = None,
    seed: int | None = None,
    init: str | InitClassifier = "ridge",
) -> list[Report]:
    """Fit one report per variant with identical preprocessing and seeds.

    The caller preprocesses once; every report echoes the same config
    fingerprint so cross-variant comparisons are apples-to-apples.
    """
    if target.labels is None:
        raise DataError("ablation needs target ground-truth labels for accuracy")
    config = dict(config or {})
    reports = []
    for variant in variants:
        run_hyper = hyper.replace(variant=variant)
        run_hyper.validate()
        start = time.perf_counter()
        state, pred = fit_uda(source, target, run_hyper, init=init)
        elapsed = time.perf_counter() - start
        reports.append(
            build_report(
                task=task,
                mode="uda",
                variant=variant,
                pred=pred,
                truth=target.labels,
                class_values=source.class_values,
                iterations_run=state.iteration,
                objective_trace=state.objective_trace,
                hyper=run_hyper,
                config=config,
                seed=seed,
                wall_time_s=elapsed,
            )
        )
    return reports
