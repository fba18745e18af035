"""Figures written next to the CSV outputs (Agg backend, files only)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _finish(fig, ax, path, title):
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="upper right", frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_shape(path, x, F, label="F(x)", expected=None, title="limit shape"):
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.plot(x, F, "k-", lw=1.5, label=label)
    if expected is not None:
        ax.plot(x, expected, "C1--", lw=1, label=r"$E F_\mu(x)$")
    ax.set_xlabel("x")
    ax.set_ylabel("F")
    _finish(fig, ax, path, title)


def plot_convergence(path, shapes, analytic, title="scaled size distributions"):
    """Mean empirical curves (with +-1 sd bands) for each mu against the analytic shape."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for i, sh in enumerate(shapes):
        sd = np.sqrt(sh.var_F)
        ax.plot(sh.grid, sh.mean_F, color=f"C{i}", lw=1, label=rf"$\mu={sh.mu:g}$")
        ax.fill_between(sh.grid, sh.mean_F - sd, sh.mean_F + sd, color=f"C{i}", alpha=0.15, lw=0)
    if analytic is not None and shapes:
        g = shapes[0].grid
        ax.plot(g, analytic(g), "k--", lw=1.2, label="F(x)")
    ax.set_xscale("log")
    ax.set_xlabel("x")
    ax.set_ylabel(r"$F_\mu(x)$")
    _finish(fig, ax, path, title)


def plot_counts(path, counts, lam, title="window counts"):
    from scipy import stats

    fig, ax = plt.subplots(figsize=(5, 3.6))
    top = int(counts.max()) if len(counts) else 0
    n = np.arange(top + 1)
    freq = np.bincount(counts, minlength=top + 1) / max(len(counts), 1)
    ax.bar(n, freq, color="0.7", label="empirical")
    ax.plot(n, stats.poisson.pmf(n, lam), "ko-", ms=3, lw=1, label=rf"Poisson($\lambda={lam:.4f}$)")
    ax.set_xlabel("count")
    ax.set_ylabel("frequency")
    _finish(fig, ax, path, title)


def plot_bell(path, rows, title="Bell statistics step shape"):
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for j in range(len(rows[0]["points"])):
        x = rows[0]["points"][j]["x"]
        ax.plot([r["M"] for r in rows], [r["points"][j]["mean"] for r in rows], "o-", label=f"x={x}")
        ax.axhline(rows[0]["points"][j]["step"], color="k", lw=0.6, ls=":")
    ax.set_xscale("log")
    ax.set_xlabel("M")
    ax.set_ylabel(r"$e^{-\nu} f(\nu x)$")
    _finish(fig, ax, path, title)
