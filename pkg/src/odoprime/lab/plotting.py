"""Line plots of report series, written as SVG (or any matplotlib format)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "svg.hashsalt": "odoprime",  # stable element ids, so figures are reproducible
    "svg.fonttype": "none",
    "figure.figsize": (5.5, 3.6),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
}


def _clean(ys):
    return [float("nan") if y is None else float(y) for y in ys]


def plot_series(name: str, series: dict, title: str = ""):
    fig, ax = plt.subplots()
    for label, ys in series["y"].items():
        ax.plot(series["x"], _clean(ys), marker="o", markersize=3, linewidth=1.2, label=label)
    if series.get("logy"):
        ax.set_yscale("log")
    ax.set_xlabel(series.get("xlabel", ""))
    ax.set_ylabel(series.get("ylabel", ""))
    ax.set_title(title or name)
    if len(series["y"]) > 1:
        ax.legend()
    fig.tight_layout()
    return fig


def write_figures(report, stem, fmt: str = "svg") -> list:
    """One figure per series, saved as ``<stem>_<series>.<fmt>``; returns the paths."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    paths = []
    with plt.rc_context(STYLE):
        for name, series in sorted(report.series.items()):
            fig = plot_series(name, series, f"{report.command}: {name}")
            path = stem.parent / f"{stem.name}_{name}.{fmt}"
            meta = {"Date": None} if fmt in ("svg", "pdf") else None
            fig.savefig(path, format=fmt, metadata=meta)
            plt.close(fig)
            paths.append(path)
    return paths
