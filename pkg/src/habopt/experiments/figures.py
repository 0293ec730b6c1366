"""Figures for the scenario reports.

Line plots go through matplotlib (SVG backend, no timestamps). Heatmaps of
2D fields are written by hand, one ``<rect>`` per cell, so a figure can be
checked cell-for-cell against the field it shows.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams.update({
    "svg.hashsalt": "habopt",
    "figure.figsize": (6.0, 3.6),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
})


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def profile_1d(path, grid, curves, title=""):
    """Plot ``{label: values}`` against the cell centers."""
    x = grid.centers(0)
    fig, ax = plt.subplots()
    for label, values in curves.items():
        ax.step(x, values, where="mid", label=label, lw=1.2)
    ax.set_xlim(0, 1)
    ax.set_xlabel("x")
    ax.legend(loc="best", frameon=False)
    if title:
        ax.set_title(title)
    return _save(fig, path)


def loglog(path, x, y, xlabel, ylabel, title=""):
    fig, ax = plt.subplots()
    ax.loglog(x, np.abs(y), "o-", ms=4)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    return _save(fig, path)


def series(path, x, ys, xlabel, ylabel, logx=False, title=""):
    fig, ax = plt.subplots()
    for label, y in ys.items():
        ax.plot(x, y, "o-", ms=3, label=label)
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(ys) > 1:
        ax.legend(loc="best", frameon=False)
    if title:
        ax.set_title(title)
    return _save(fig, path)


def crenel_scan(path, summary_rows, scan_rows):
    """F against crenel offset, one curve per mu, normalized to each curve's max."""
    fig, ax = plt.subplots()
    for srow in summary_rows:
        mu = srow["mu"]
        pts = [(r["parameter"], r["F"]) for r in scan_rows
               if r["mu"] == mu and r["family"] == "single"]
        a, f = np.array(pts).T
        ax.plot(a, f - f.max(), lw=1, label=f"mu={mu:.3g}")
    ax.set_xlabel("crenel offset a")
    ax.set_ylabel("F - max F (single crenels)")
    ax.legend(loc="best", frameon=False, fontsize=7)
    return _save(fig, path)


def _color(t):
    # viridis-like ramp without relying on colormap internals
    r, g, b = (np.array(matplotlib.colormaps["viridis"](float(t))[:3]) * 255).round().astype(int)
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap_svg(path, field, vmin=None, vmax=None, title="", cell_px=6):
    """Write a 2D field as SVG, one rect per cell.

    Axis 0 runs left to right and axis 1 bottom to top, matching the
    ``(x, y)`` cell-center convention.
    """
    arr = field.reshaped()
    if arr.ndim != 2:
        raise ValueError("heatmap_svg needs a 2D field")
    nx, ny = arr.shape
    lo = float(arr.min()) if vmin is None else vmin
    hi = float(arr.max()) if vmax is None else vmax
    span = hi - lo if hi > lo else 1.0
    top = 16 if title else 0
    w, h = nx * cell_px, ny * cell_px + top
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
    ]
    if title:
        parts.append(f'<text x="2" y="12" font-size="11" font-family="sans-serif">'
                     f'{escape(title)}</text>')
    for i in range(nx):
        for j in range(ny):
            t = (arr[i, j] - lo) / span
            y = top + (ny - 1 - j) * cell_px
            parts.append(f'<rect x="{i * cell_px}" y="{y}" width="{cell_px}" '
                         f'height="{cell_px}" fill="{_color(min(max(t, 0.0), 1.0))}"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
    return path
