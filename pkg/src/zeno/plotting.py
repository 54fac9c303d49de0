"""SVG plots drawn from CSV artifacts (no physics is computed here)."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .output import read_csv  # noqa: E402

# reproducible SVG bytes
matplotlib.rcParams["svg.hashsalt"] = "zeno"


def plot_csv(svg_path, series: Sequence[tuple], x: str, y: str = "value", xlabel: Optional[str] = None,
             ylabel: Optional[str] = None, xscale: str = "linear", yscale: str = "linear",
             title: Optional[str] = None) -> Path:
    """Draw one line per ``(csv_path, label, style)`` entry and save as SVG.

    ``style`` is a matplotlib format string such as ``"-"`` or ``"--"``.
    Error bars are drawn when the file has a non-empty ``stderr`` column.
    """
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    try:
        for path, label, style in series:
            _, _, data = read_csv(path)
            xs, ys = data[x], data[y]
            keep = (xs > 0 if xscale == "log" else xs == xs) & (ys > 0 if yscale == "log" else ys == ys)
            ax.plot(xs[keep], ys[keep], style, label=label, lw=1.2)
            se = data.get("stderr")
            if se is not None and (se == se).any():
                ax.fill_between(xs[keep], (ys - 3 * se)[keep], (ys + 3 * se)[keep], alpha=0.2, lw=0)
        ax.set_xscale(xscale)
        ax.set_yscale(yscale)
        ax.set_xlabel(xlabel or x)
        ax.set_ylabel(ylabel or y)
        if title:
            ax.set_title(title)
        ax.legend(fontsize=8)
        fig.tight_layout()
        svg_path = Path(svg_path)
        fig.savefig(svg_path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
    return svg_path
