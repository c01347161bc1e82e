"""Figure rendering for the CLI report path (PNG files next to the reports)."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import Report


def render_report_figures(report: Report, out_dir: str, stem: str) -> list[str]:
    """Render the objective trace and per-class accuracies; returns file paths."""
    written: list[str] = []
    if report.objective_trace:
        fig, ax = plt.subplots(figsize=(6, 4))
        iters = range(1, len(report.objective_trace) + 1)
        ax.plot(iters, report.objective_trace, marker="o")
        ax.set_xlabel("iteration")
        ax.set_ylabel("objective value")
        ax.set_title(f"{report.task}: objective trace ({report.variant})")
        ax.grid(True, alpha=0.3)
        path = os.path.join(out_dir, f"{stem}_objective.png")
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(path)
    if report.per_class_accuracy is not None:
        fig, ax = plt.subplots(figsize=(6, 4))
        labels = [str(v) for v in report.class_values]
        ax.bar(labels, report.per_class_accuracy)
        if report.mean_per_class is not None:
            ax.axhline(report.mean_per_class, color="k", linestyle="--", lw=1,
                       label=f"mean {report.mean_per_class:.1f}%")
            ax.legend()
        ax.set_xlabel("class")
        ax.set_ylabel("accuracy (%)")
        ax.set_ylim(0, 105)
        ax.set_title(f"{report.task}: per-class accuracy ({report.variant})")
        path = os.path.join(out_dir, f"{stem}_per_class.png")
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(path)
    return written
