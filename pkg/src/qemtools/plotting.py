"""Figures written next to the CSV outputs (non-interactive Agg backend)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.dpi": 110,
    "savefig.dpi": 150,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    return path


def plot_decay(rows: Sequence[dict], path: str | Path, title: str = "") -> Path:
    """Noisy expectation against mean error count, one line per observable."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.5, 3.8))
        for label in sorted({r["observable"] for r in rows}):
            sub = sorted((float(r["mu"]), float(r["expectation"]), float(r["noiseless"]))
                         for r in rows if r["observable"] == label)
            mu = [0.0] + [s[0] for s in sub]
            y = [sub[0][2]] + [s[1] for s in sub]
            ax.plot(mu, y, marker="o", ms=2.5, lw=0.8)
        ax.axhline(0.0, color="k", lw=0.6)
        ax.set_xlabel(r"mean error count $\mu$")
        ax.set_ylabel(r"$\langle O_\mu \rangle$")
        if title:
            ax.set_title(title)
        return _save(fig, Path(path))


def plot_costs(rows: Sequence[dict], path: str | Path) -> Path:
    gammas = sorted({float(r["gamma"]) for r in rows})
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(gammas), figsize=(3.2 * len(gammas), 3.0), sharey=True, squeeze=False)
        for ax, g in zip(axes[0], gammas):
            sub = sorted((float(r["mu"]), r) for r in rows if float(r["gamma"]) == g)
            mu = np.array([s[0] for s in sub])
            for key, style in (("C_Q0", "-"), ("C_QE", "--"), ("C_QH", ":")):
                ax.semilogy(mu, [float(s[1][key]) for s in sub], style, label=key[2:])
            ax.set_title(rf"$\gamma = {g:g}$")
            ax.set_xlabel(r"$\mu$")
        axes[0][0].set_ylabel("sampling cost factor")
        axes[0][0].legend()
        return _save(fig, Path(path))


def plot_mitigation(summary: Sequence[dict], path: str | Path) -> Path:
    """Mean bias per method, grouped by mean error count."""
    rows = [r for r in summary if r["decay_class"] == "all"]
    mus = sorted({float(r["mu"]) for r in rows})
    methods = sorted({r["method"] for r in rows})
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        width = 0.8 / max(len(methods), 1)
        for i, m in enumerate(methods):
            vals = [next((float(r["mean_bias"]) for r in rows if r["method"] == m and float(r["mu"]) == mu), np.nan)
                    for mu in mus]
            ax.bar(np.arange(len(mus)) + i * width, vals, width, label=m)
        ax.set_xticks(np.arange(len(mus)) + 0.4 - width / 2)
        ax.set_xticklabels([f"{mu:g}" for mu in mus])
        ax.set_xlabel(r"$\mu$")
        ax.set_ylabel("mean absolute bias")
        ax.set_yscale("symlog", linthresh=1e-6)
        ax.legend()
        return _save(fig, Path(path))
