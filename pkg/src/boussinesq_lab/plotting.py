"""Static SVG line charts with reproducible bytes."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["line_plot"]

plt.rcParams["svg.hashsalt"] = "boussinesq-lab"
plt.rcParams["svg.fonttype"] = "none"


def line_plot(
    path,
    series: dict,
    xlabel: str,
    ylabel: str,
    title: str = "",
    logx: bool = False,
    logy: bool = False,
    hline: float | None = None,
    hline_label: str = "",
    markers: bool = False,
) -> Path:
    """Write ``{label: (x, y)}`` as an SVG line chart."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, (x, y) in series.items():
        ax.plot(x, y, marker="o" if markers else None, ms=3, lw=1.2, label=str(label))
    if hline is not None:
        ax.axhline(hline, color="0.4", ls="--", lw=1.0, label=hline_label or None)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    if series or hline is not None:
        ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
