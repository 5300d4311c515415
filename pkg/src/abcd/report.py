"""Render figures for a finished run directory.

Reads the exported artifacts (summary.csv, trace.jsonl, eig_diagnostics.json)
and writes PNG figures next to them. Pure post-processing: the simulator
itself only exports data.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .loop import read_trace

FIGURE_DPI = 130


class ReportError(RuntimeError):
    pass


def _read_summary(path: Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [dict(row) for row in csv.DictReader(fh)]


def render_run(run_dir: str | Path, out_dir: str | Path | None = None) -> list[Path]:
    """Render all figures for a run; returns the paths written."""
    run_dir = Path(run_dir)
    out_dir = Path(out_dir) if out_dir is not None else run_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = run_dir / "trace.jsonl"
    summary_path = run_dir / "summary.csv"
    if not trace_path.exists() or not summary_path.exists():
        raise ReportError(f"{run_dir} does not look like a run directory (missing trace/summary)")
    records = read_trace(trace_path)
    written: list[Path] = []
    if records:
        written.append(_convergence_figure(records, out_dir / "convergence.png"))
        written.append(_posterior_figure(records, out_dir / "posterior.png"))
    diag_path = run_dir / "eig_diagnostics.json"
    if diag_path.exists():
        diagnostics = json.loads(diag_path.read_text(encoding="utf-8"))
        if diagnostics:
            written.append(_eig_landscape_figure(diagnostics, out_dir / "eig_landscape.png"))
    return written


def _convergence_figure(records, path: Path) -> Path:
    ts = [r.t for r in records]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax1.plot(ts, [r.entropy for r in records], marker="o", color="tab:blue")
    ax1.set_ylabel("posterior entropy (nats)")
    ax1.grid(alpha=0.3)
    if any(r.p_true is not None for r in records):
        ax2.plot(ts, [r.p_true for r in records], marker="o", color="tab:green")
        ax2.axhline(0.99, color="grey", ls="--", lw=0.8)
        ax2.set_ylabel("posterior mass on truth")
    ax2.set_xlabel("intervention step")
    ax2.grid(alpha=0.3)
    fig.suptitle("Belief convergence")
    fig.tight_layout()
    fig.savefig(path, dpi=FIGURE_DPI)
    plt.close(fig)
    return path


def _posterior_figure(records, path: Path) -> Path:
    post = np.array([r.posterior for r in records])
    ts = [r.t for r in records]
    # show only graphs that ever matter
    keep = np.where(post.max(axis=0) > 0.01)[0]
    if keep.size == 0:
        keep = np.arange(min(5, post.shape[1]))
    fig, ax = plt.subplots(figsize=(7, 4))
    for k in keep:
        ax.plot(ts, post[:, k], marker=".", label=f"graph {k}")
    ax.set_xlabel("intervention step")
    ax.set_ylabel("posterior probability")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8, ncol=2)
    fig.suptitle("Graph posterior over time")
    fig.tight_layout()
    fig.savefig(path, dpi=FIGURE_DPI)
    plt.close(fig)
    return path


def _eig_landscape_figure(diagnostics, path: Path) -> Path:
    targets = sorted({rec["target"] for step in diagnostics for rec in step["evaluations"]})
    fig, axes = plt.subplots(1, len(targets), figsize=(4 * len(targets), 3.5), squeeze=False)
    n_steps = max(len(diagnostics), 1)
    cmap = plt.get_cmap("viridis")
    for ax, target in zip(axes[0], targets):
        for step in diagnostics:
            pts = [(rec["x"], rec["eig"]) for rec in step["evaluations"] if rec["target"] == target]
            if not pts:
                continue
            xs, ys = zip(*pts)
            ax.scatter(xs, ys, s=14, color=cmap(step["t"] / n_steps), alpha=0.8)
        ax.set_title(f"target node {target}")
        ax.set_xlabel("intervention value")
        ax.grid(alpha=0.3)
    axes[0][0].set_ylabel("estimated objective")
    fig.suptitle("Evaluated design objective (colour = step)")
    fig.tight_layout()
    fig.savefig(path, dpi=FIGURE_DPI)
    plt.close(fig)
    return path
