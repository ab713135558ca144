"""Figure rendering for result tables and diagnostic curves."""

from __future__ import annotations

import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def read_results(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [dict(r) for r in csv.DictReader(fh)]


def aggregate_results(rows: list[dict]) -> list[dict]:
    """Mean and standard error of log_rel_hv_diff per (method, iteration)."""
    groups = defaultdict(list)
    for r in rows:
        groups[(r["method"], int(r["iteration"]))].append(
            float(r["log_rel_hv_diff"]))
    out = []
    for (method, it), vals in sorted(groups.items()):
        v = np.asarray(vals)
        out.append({"method": method, "iteration": it,
                    "mean_log_rel_hv_diff": float(v.mean()),
                    "stderr": float(v.std(ddof=1) / np.sqrt(v.size))
                    if v.size > 1 else 0.0,
                    "n": int(v.size)})
    return out


def write_aggregate(agg: list[dict], path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["method", "iteration",
                                                "mean_log_rel_hv_diff",
                                                "stderr", "n"])
        writer.writeheader()
        for row in agg:
            writer.writerow(row)


def plot_convergence(agg: list[dict], path):
    """Mean metric curve with a standard-error band, one line per method."""
    fig, ax = plt.subplots(figsize=(6, 4))
    methods = sorted({r["method"] for r in agg})
    for method in methods:
        rows = sorted((r for r in agg if r["method"] == method),
                      key=lambda r: r["iteration"])
        it = np.array([r["iteration"] for r in rows])
        mu = np.array([r["mean_log_rel_hv_diff"] for r in rows])
        se = np.array([r["stderr"] for r in rows])
        ax.plot(it, mu, label=method)
        ax.fill_between(it, mu - se, mu + se, alpha=0.2)
    ax.set_xlabel("evaluations")
    ax.set_ylabel("mean log relative HV difference")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_ep_validation(grid: np.ndarray, ep_curves: np.ndarray,
                       mc_curves: np.ndarray, path):
    """Overlaid EP and Monte-Carlo acquisition curves, per objective and total.

    ``ep_curves``/``mc_curves`` have shape (n_grid, K); the total is their
    row sum.  Curves are shifted to zero mean for shape comparison.
    """
    K = ep_curves.shape[1]
    fig, axes = plt.subplots(1, K + 1, figsize=(4 * (K + 1), 3.2),
                             squeeze=False)
    panels = [("total", ep_curves.sum(axis=1), mc_curves.sum(axis=1))]
    panels += [(f"objective {k + 1}", ep_curves[:, k], mc_curves[:, k])
               for k in range(K)]
    for ax, (title, ep, mc) in zip(axes[0], panels):
        ax.plot(grid, ep - ep.mean(), label="EP")
        ax.plot(grid, mc - mc.mean(), "--", label="Monte Carlo")
        ax.set_title(title)
        ax.set_xlabel("x")
    axes[0][0].set_ylabel("acquisition (centered)")
    axes[0][0].legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_front(points: np.ndarray, path, reference=None):
    """Scatter of a 2-D front; higher dimensions plot pairwise panels."""
    K = points.shape[1]
    if K == 2:
        fig, ax = plt.subplots(figsize=(4.5, 4))
        ax.scatter(points[:, 0], points[:, 1], s=12)
        if reference is not None:
            ax.scatter([reference[0]], [reference[1]], marker="x", c="r")
        ax.set_xlabel("objective 1")
        ax.set_ylabel("objective 2")
    else:
        pairs = [(i, j) for i in range(K) for j in range(i + 1, K)]
        fig, axes = plt.subplots(1, len(pairs),
                                 figsize=(3.4 * len(pairs), 3.2),
                                 squeeze=False)
        for ax, (i, j) in zip(axes[0], pairs):
            ax.scatter(points[:, i], points[:, j], s=10)
            ax.set_xlabel(f"objective {i + 1}")
            ax.set_ylabel(f"objective {j + 1}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
