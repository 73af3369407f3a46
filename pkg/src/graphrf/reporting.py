"""Figure rendering for CLI reports.

Every plot function takes plain arrays plus an output path and writes a
PNG next to the CSV/JSON it illustrates. matplotlib runs on the Agg
backend so reports render identically on headless machines.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
}


def _new_axes():
    plt.rcParams.update(_STYLE)
    fig, ax = plt.subplots()
    return fig, ax


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_error_vs_walks(walks, series: dict, path, ylabel="relative Frobenius error"):
    """One line per kernel/method: mean error against walker count, log-log.

    `series` maps label -> (means, stds); stds may be None.
    """
    fig, ax = _new_axes()
    for label, (means, stds) in series.items():
        means = np.asarray(means, dtype=np.float64)
        line = ax.plot(walks, means, marker="o", label=label)[0]
        if stds is not None:
            stds = np.asarray(stds, dtype=np.float64)
            ax.fill_between(walks, means - stds, means + stds, alpha=0.2, color=line.get_color())
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("walks per node m")
    ax.set_ylabel(ylabel)
    ax.legend()
    _finish(fig, path)


def plot_bench(nodes, exact_seconds, grf_seconds, errors, path):
    fig, ax = _new_axes()
    ax.loglog(nodes, exact_seconds, marker="s", label="exact")
    ax.loglog(nodes, grf_seconds, marker="o", label="random features")
    ax.set_xlabel("nodes N")
    ax.set_ylabel("wall-clock seconds")
    ax.legend(loc="upper left")
    if errors is not None:
        twin = ax.twinx()
        twin.semilogx(nodes, errors, color="green", linestyle="--", marker=".", label="error")
        twin.set_ylabel("relative Frobenius error", color="green")
    _finish(fig, path)


def plot_training_trace(trace, path, window: int = 50):
    epochs = [row[0] for row in trace]
    losses = np.array([row[1] for row in trace])
    fig, ax = _new_axes()
    ax.plot(epochs, losses, alpha=0.35, label="loss")
    if len(losses) >= window:
        kernel = np.ones(window) / window
        smooth = np.convolve(losses, kernel, mode="valid")
        ax.plot(epochs[window - 1 :], smooth, label=f"smoothed (window {window})")
    ax.set_xlabel("epoch")
    ax.set_ylabel("training loss")
    ax.legend()
    _finish(fig, path)


def plot_modulations(lengths, table: dict, path):
    """Modulation-function values against walk length, one line per label."""
    fig, ax = _new_axes()
    for label, values in table.items():
        ax.plot(lengths, values, marker="o", markersize=3, label=label)
    ax.set_xlabel("walk length")
    ax.set_ylabel("modulation value")
    ax.legend()
    _finish(fig, path)
