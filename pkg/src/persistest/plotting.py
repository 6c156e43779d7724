"""Figures for CLI reports.  Everything renders off-screen to PNG files."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = [
    "plot_diagrams",
    "plot_difference_path",
    "plot_difference_surface",
    "plot_limit_draws",
    "plot_power_curve",
]

_STYLE = {
    "figure.figsize": (5.0, 3.6),
    "figure.dpi": 100,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.frameon": False,
}
# no timestamps or software strings, so reruns write identical files
_META = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, metadata=_META)
    plt.close(fig)
    return path


def plot_diagrams(diagrams, path, labels=None, title=None) -> Path:
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 4.2))
        hi = 0.0
        for i, D in enumerate(diagrams):
            pts = np.asarray(D.pairs).reshape(-1, 2)
            lab = labels[i] if labels else None
            ax.scatter(pts[:, 0], pts[:, 1], s=10, alpha=0.6, label=lab)
            if pts.size:
                hi = max(hi, float(pts.max()))
        hi = hi * 1.05 or 1.0
        ax.plot([0, hi], [0, hi], color="0.4", lw=0.8)
        ax.set_xlim(0, hi)
        ax.set_ylim(0, hi)
        ax.set_xlabel("birth")
        ax.set_ylabel("death")
        if labels:
            ax.legend()
        if title:
            ax.set_title(title)
        return _save(fig, path)


def plot_difference_path(points, values, path, D_hat=None) -> Path:
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.plot(points, values, lw=1.2, label="D(s)")
        if D_hat is not None:
            ax.plot(points, np.asarray(points) * D_hat, ls="--", lw=0.9, label="s D(1)")
            ax.legend()
        ax.axhline(0, color="0.4", lw=0.6)
        ax.set_xlabel("s")
        ax.set_ylabel("difference")
        return _save(fig, path)


def plot_difference_surface(points, values, path) -> Path:
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.6, 3.8))
        v = np.asarray(values)
        lim = float(np.abs(v).max()) or 1.0
        p = np.asarray(points)
        im = ax.pcolormesh(p, p, v.T, cmap="RdBu_r", vmin=-lim, vmax=lim, shading="nearest")
        fig.colorbar(im, ax=ax)
        ax.set_xlabel("s")
        ax.set_ylabel("t")
        ax.grid(False)
        return _save(fig, path)


def plot_limit_draws(draws, path, quantile=None, bins=200, clip=0.999) -> Path:
    x = np.asarray(draws, dtype=float)
    x = x[np.isfinite(x)]
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        if x.size:
            lo, hi = np.quantile(x, [1 - clip, clip])
            ax.hist(x[(x >= lo) & (x <= hi)], bins=bins, density=True, color="C0", alpha=0.7)
        if quantile is not None:
            ax.axvline(quantile, color="C3", lw=1.0, label=f"q = {quantile:.3f}")
            ax.legend()
        ax.set_xlabel("W")
        ax.set_ylabel("density")
        return _save(fig, path)


def plot_power_curve(effects, rates, path, alpha=None) -> Path:
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.plot(effects, rates, marker="o", ms=3)
        if alpha is not None:
            ax.axhline(alpha, color="0.4", ls=":", lw=0.8)
        ax.set_ylim(-0.02, 1.02)
        ax.set_xlabel("effect")
        ax.set_ylabel("rejection rate")
        return _save(fig, path)
