"""Matplotlib figures written next to the delimited report files."""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

RC = {
    "font.family": "serif",
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (5.0, 3.6),
    "figure.dpi": 120,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "savefig.bbox": "tight",
    # keeps PNG bytes stable across runs
    "svg.hashsalt": "l1rates",
}


def _format_axes(ax):
    for spine in ("top", "right"):
        ax.spines[spine].set_visible(False)
    for spine in ("bottom", "left"):
        ax.spines[spine].set_linewidth(0.5)
    ax.grid(True, which="major", lw=0.3, alpha=0.6)
    return ax


def plot_rates(report, path):
    """Log-log plot of the measured error, the bound and the fitted line."""
    path = Path(path)
    rows = [r for r in report.rows if r.converged and r.error_l1 > 0]
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        _format_axes(ax)
        d = [r.delta for r in report.rows]
        ax.loglog(d, [r.bound for r in report.rows], "k--", label="bound")
        ax.loglog([r.delta for r in rows], [r.error_l1 for r in rows], "o-", color="C0",
                  mfc="w", label=r"$\|x_\alpha^\delta - x^\dagger\|_1$")
        if rows and math.isfinite(report.slope):
            fit = [math.exp(report.intercept) * r.delta ** report.slope for r in rows]
            ax.loglog([r.delta for r in rows], fit, ":", color="C1",
                      label=f"fit $O(\\delta^{{{report.slope:.2f}}})$")
        ax.set_xlabel(r"noise level $\delta$")
        ax.set_ylabel(r"$\ell^1$ error")
        ax.legend(loc="lower right", frameon=False)
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
    return path


def plot_gamma_sweep(sweep, path):
    """``gamma_n`` against ``n`` for each tail allowance ``mu``.

    ``sweep`` maps ``mu`` to a sequence of gammas.
    """
    path = Path(path)
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        _format_axes(ax)
        cmap = plt.get_cmap("viridis")
        mus = sorted(sweep)
        for i, mu in enumerate(mus):
            g = sweep[mu]
            ax.semilogy(range(1, len(g) + 1), g, "o-", color=cmap(i / max(len(mus) - 1, 1)),
                        label=f"$\\mu={mu:g}$")
        ax.set_xlabel("cut-off $n$")
        ax.set_ylabel(r"$\gamma_n$")
        ax.legend(ncol=3, frameon=False)
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
    return path
