"""Figures written next to the JSON/CSV outputs (headless, Agg backend)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .analysis import ProbabilityEstimates  # noqa: E402

_RC = {
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 9,
    "ytick.labelsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}

_OUTCOMES = (("P10", "(1,0)"), ("P01", "(0,1)"), ("P11", "(1,1)"), ("P00", "(0,0)"))


def size(scale=1.0):
    golden = (math.sqrt(5.0) - 1.0) / 2.0
    width = 6.0 * scale
    return width, width * golden


def new(scale=1.0):
    with plt.rc_context(_RC):
        return plt.subplots(figsize=size(scale))


def save(fig, path):
    with plt.rc_context(_RC):
        fig.tight_layout()
        fig.savefig(path)
    plt.close(fig)


def joint_distribution(est: ProbabilityEstimates, path, title="",
                       analytic: dict[tuple[int, int], float] | None = None):
    """Bar chart of the four heralded outcome probabilities with 1-sigma bars."""
    fig, ax = new()
    labels = [lbl for _, lbl in _OUTCOMES]
    values = [getattr(est, k) for k, _ in _OUTCOMES]
    errs = [est.std_err[k] for k, _ in _OUTCOMES]
    ax.bar(labels, values, yerr=errs, color="0.6", edgecolor="k", capsize=4, label="simulated")
    if analytic is not None:
        keys = [(1, 0), (0, 1), (1, 1), (0, 0)]
        ax.scatter(labels, [analytic[k] for k in keys], marker="_", s=600, color="C3",
                   zorder=3, label="analytic")
        ax.legend(frameon=False)
    ax.set_xlabel("(click A, click B)")
    ax.set_ylabel("probability per herald")
    ax.set_ylim(0, max(0.55, max(values) * 1.15))
    if title:
        ax.set_title(title)
    save(fig, path)


def sweep(rows: list[dict], parameter: str, path, unit=""):
    """P11 (left axis) and the timelike/spacelike flag (right axis) against a parameter."""
    fig, ax = new()
    x = [r["value"] for r in rows]
    xlabel = f"{parameter} [{unit}]" if unit else parameter
    has_sim = rows and rows[0].get("P11") not in (None, "")
    if has_sim:
        y = [r["P11"] for r in rows]
        e = [r["P11_se"] for r in rows]
        ax.errorbar(x, y, yerr=e, fmt="o-", ms=3, color="k", label="P(1,1)")
        ax.set_ylabel("P(1,1) per herald")
    ax2 = ax.twinx() if has_sim else ax
    ax2.step(x, [1 if r["separation"] == "timelike" else 0 for r in rows], where="post",
             color="C0", label="timelike")
    ax2.set_yticks([0, 1], ["spacelike", "timelike"])
    ax.set_xlabel(xlabel)
    save(fig, path)
