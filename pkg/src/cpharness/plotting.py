"""Figures written next to the JSON/TSV reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.ticker import MaxNLocator  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.2),
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}


def plot_trajectory(trajectory, path, max_points=None, title=None):
    """Cumulative score against submission number."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        steps = [e["step"] + 1 for e in trajectory]
        scores = [e["cumulative"] for e in trajectory]
        ax.step([0] + steps, [0] + scores, where="post", color="C0")
        ax.plot(steps, scores, "o", color="C0", ms=3)
        ax.xaxis.set_major_locator(MaxNLocator(integer=True))
        if max_points is not None:
            ax.axhline(max_points, color="0.6", lw=0.8, ls="--")
        ax.set_xlabel("submission")
        ax.set_ylabel("score")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_pass_at_k(rows, path, title=None):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        labels = [r["problem"].split()[-1] for r in rows]
        vals = [float(r["pass@k"]) for r in rows]
        colors = ["C2" if r["solved"] == "solved" else "C3" for r in rows]
        ax.bar(np.arange(len(rows)), vals, color=colors)
        ax.set_xticks(np.arange(len(rows)), labels)
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("pass@k")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_likelihood(ll, estimate, path, lo=0.0, hi=4500.0):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        xs = np.linspace(lo, hi, 451)
        ax.plot(xs, [ll(x) for x in xs], color="C0")
        ax.axvline(estimate, color="C3", lw=0.8)
        ax.set_xlabel("rating")
        ax.set_ylabel("mean log-likelihood")
        ax.set_title(f"estimate {estimate:.0f}")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path
