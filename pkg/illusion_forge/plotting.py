"""SVG figures for fits and stimulus previews.

Output is byte-stable across runs: the SVG hash salt is fixed and no date
metadata is written.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Sequence, Tuple

import matplotlib as mpl

mpl.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from analysis import confidence_band, evaluate_fit  # noqa: E402
from models import FitResult  # noqa: E402
from raster import RasterImage  # noqa: E402

logger = logging.getLogger(__name__)

FIGURE_STYLE = {
    "svg.hashsalt": "illusion-forge",
    "svg.fonttype": "none",
    "font.family": "sans-serif",
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (4.5, 3.2),
}

POINT_COLOR = "#333333"
FIT_COLORS = {1: "#1f5fbf", 2: "#d2691e"}  # blue line for linear, dark orange for quadratic


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)
    logger.info(f"Wrote figure {path}")
    return path


def render_fit_svg(
    x: Sequence[float],
    y: Sequence[float],
    fit: Optional[FitResult],
    path: str | Path,
    x_label: str = "x",
    y_label: str = "accuracy",
    grid_points: int = 101,
) -> Path:
    """Scatter of the points, fitted curve and shaded confidence band."""
    with mpl.rc_context(FIGURE_STYLE):
        fig, ax = plt.subplots()
        ax.scatter(x, y, s=12, color=POINT_COLOR, zorder=3, label="points")
        if fit is not None and len(x):
            grid = np.linspace(min(x), max(x), grid_points)
            lo, hi = confidence_band(fit, grid, fit.level)
            color = FIT_COLORS.get(fit.degree, "#444444")
            ax.fill_between(grid, lo, hi, color=color, alpha=0.2, linewidth=0, label=f"{int(fit.level * 100)}% band")
            ax.plot(grid, evaluate_fit(fit, grid), color=color, linewidth=1.5, label=f"degree-{fit.degree} fit")
            if fit.vertex is not None and min(x) <= fit.vertex <= max(x):
                ax.axvline(fit.vertex, color=color, linestyle=":", linewidth=1)
            ax.set_title(f"R² = {fit.r_squared:.3f}")
        ax.set_xlabel(x_label)
        ax.set_ylabel(y_label)
        ax.legend(loc="best", frameon=False)
        return _save(fig, path)


def render_montage_svg(columns: Sequence[Tuple[str, RasterImage, RasterImage]], path: str | Path) -> Path:
    """Two rows (illusory over control), one column per (title, illusory, control)."""
    n = len(columns)
    with mpl.rc_context(FIGURE_STYLE):
        fig, axes = plt.subplots(2, n, figsize=(1.8 * n, 3.8), squeeze=False)
        for col, (title, illusory, control) in enumerate(columns):
            for row, image in enumerate((illusory, control)):
                ax = axes[row][col]
                ax.imshow(image.pixels, interpolation="nearest")
                ax.set_xticks([])
                ax.set_yticks([])
                if row == 0:
                    ax.set_title(title)
        axes[0][0].set_ylabel("illusion")
        axes[1][0].set_ylabel("control")
        return _save(fig, path)
