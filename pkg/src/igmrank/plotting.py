"""Figures for experiment reports.  matplotlib is imported on first use."""
from __future__ import annotations

from pathlib import Path

import numpy as np

__all__ = ["render", "plot_table1", "plot_fig4", "plot_table3", "plot_bic"]


def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _save(fig, path) -> Path:
    path = Path(path).with_suffix(".png")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    _plt().close(fig)
    return path


def plot_table1(summary: list[dict], path) -> Path:
    """theta_hat mean +- sd against N, one line per (theta, t)."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    keys = sorted({(r["theta"], r["t"]) for r in summary})
    for th, t in keys:
        rows = sorted((r for r in summary if (r["theta"], r["t"]) == (th, t)), key=lambda r: r["N"])
        ax.errorbar([r["N"] for r in rows], [r["mean"] for r in rows], yerr=[r["sd"] for r in rows],
                    marker="o", capsize=3, label=f"theta={th:g}, t={t}")
    for th in sorted({k[0] for k in keys}):
        ax.axhline(th, color="0.6", lw=0.8, ls="--")
    ax.set_xscale("log")
    ax.set_xlabel("sample size N")
    ax.set_ylabel("estimated theta")
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_fig4(replicates: list[dict], path) -> Path:
    """Boxplots of theta_hat_j per rank, one panel per N, truth overlaid."""
    plt = _plt()
    ok = [r for r in replicates if "error" not in r]
    Ns = sorted({r["N"] for r in ok})
    fig, axes = plt.subplots(1, max(1, len(Ns)), figsize=(4.5 * max(1, len(Ns)), 3.8), squeeze=False)
    for ax, N in zip(axes[0], Ns):
        est = np.array([r["theta_hat"] for r in ok if r["N"] == N])
        t = est.shape[1]
        th1 = ok[0]["theta1"]
        truth = th1 * 2.0 ** (-np.arange(t) / 2)
        ax.boxplot(est, positions=np.arange(1, t + 1))
        ax.plot(np.arange(1, t + 1), truth, color="k", lw=1)
        ax.set_title(f"N = {N}")
        ax.set_xlabel("rank j")
        ax.set_ylabel("theta_j")
    return _save(fig, path)


def plot_table3(summary: list[dict], path) -> Path:
    """Mean classification error per method against t."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for method in ("ebms", "kmeans", "em"):
        rows = sorted((r for r in summary if r["method"] == method), key=lambda r: r["t"])
        ax.errorbar([r["t"] for r in rows], [r["mean"] for r in rows], yerr=[r["sd"] for r in rows],
                    marker="o", capsize=3, label=method)
    ax.set_xlabel("t")
    ax.set_ylabel("classification error")
    ax.legend()
    return _save(fig, path)


def plot_bic(summary: list[dict], path) -> Path:
    """Selection counts per tied model r."""
    plt = _plt()
    kinds = sorted({r["kind"] for r in summary})
    fig, ax = plt.subplots(figsize=(5, 3.6))
    width = 0.8 / max(1, len(kinds))
    for k, kind in enumerate(kinds):
        rows = [r for r in summary if r["kind"] == kind]
        ax.bar(np.array([r["r"] for r in rows]) + k * width, [r["chosen"] for r in rows], width, label=kind)
    ax.set_xlabel("r")
    ax.set_ylabel("times chosen")
    ax.legend()
    return _save(fig, path)


def render(report: dict, stem) -> list[Path]:
    """Figures for a driver report; files are named after ``stem``."""
    driver = report.get("driver")
    if driver == "table1":
        return [plot_table1(report["summary"], stem)]
    if driver == "fig4":
        return [plot_fig4(report["replicates"], stem)]
    if driver == "table3":
        return [plot_table3(report["summary"], stem)]
    if driver == "bic":
        return [plot_bic(report["summary"], stem)]
    return []
