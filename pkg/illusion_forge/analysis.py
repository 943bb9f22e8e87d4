"""Seed aggregation, polynomial fits, permutation tests and plot-data export.

Fits solve the normal equations on centered and scaled x
(``z = (x - mean(x)) / max|x - mean(x)|``) and report coefficients in the raw
x basis. Confidence bands use the leverage formula

    half_width(x) = t_{(1+level)/2, n-p} * sqrt(sigma^2 * v(x)^T (Z^T Z)^-1 v(x))

with ``v(x)`` the Vandermonde row of ``z(x)`` and ``sigma^2 = SS_res / (n - p)``.
P-values come from label permutations and are floored at ``1 / n_permutations``.
"""

from __future__ import annotations

import logging
import math
from fractions import Fraction
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.polynomial import Polynomial
from numpy.polynomial import polynomial as P
from scipy import stats

from config import settings
from errors import Degenerate, EmptyInput, InvalidParams, ShapeMismatch, TooFewPoints
from models import FitResult, SeedAggregate

logger = logging.getLogger(__name__)

PLOT_COLUMNS = ["x", "y", "fit", "band_lo", "band_hi"]
PERMUTATION_CHUNK = 2000


def aggregate_seeds(values: Sequence[float]) -> SeedAggregate:
    """Mean, sample standard deviation (n-1; 0 for a single value) and max.

    Sums are exact (rational) so the mean of equal values is that value and
    never rounds above the max.
    """
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise EmptyInput("aggregate_seeds needs at least one value")
    exact = [Fraction(v) for v in arr.tolist()]
    mean = sum(exact, Fraction(0)) / len(exact)
    if len(exact) > 1:
        variance = sum(((v - mean) ** 2 for v in exact), Fraction(0)) / (len(exact) - 1)
    else:
        variance = Fraction(0)
    return SeedAggregate(n=int(arr.size), mean=float(mean), std=math.sqrt(variance), max=float(arr.max()))


# ---------------------------------------------------------------------------
# Least squares
# ---------------------------------------------------------------------------


def _scaled(x: np.ndarray) -> Tuple[np.ndarray, float, float]:
    center = float(np.mean(x))
    scale = float(np.max(np.abs(x - center)))
    if scale == 0.0:
        raise Degenerate("x values are all equal")
    return (x - center) / scale, center, scale


def _design(z: np.ndarray, degree: int) -> np.ndarray:
    return np.vander(z, degree + 1, increasing=True)


def _check_inputs(x, y, degree: int) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeMismatch(f"x and y must be 1-D of equal length, got {x.shape} and {y.shape}")
    if x.size < degree + 2:
        raise TooFewPoints(f"degree-{degree} fit needs at least {degree + 2} points, got {x.size}")
    return x, y


def _hat_projection(z: np.ndarray, degree: int) -> np.ndarray:
    design = _design(z, degree)
    gram = design.T @ design
    if np.linalg.matrix_rank(gram) < degree + 1:
        raise Degenerate(f"design matrix of the degree-{degree} fit is rank deficient")
    return design @ np.linalg.solve(gram, design.T)


def r_squared(y: np.ndarray, fitted: np.ndarray) -> float:
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else -math.inf
    return 1.0 - ss_res / ss_tot


def pearson_r(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    dx, dy = x - x.mean(), y - y.mean()
    denom = math.sqrt(float(np.sum(dx * dx)) * float(np.sum(dy * dy)))
    if denom == 0.0:
        return 0.0
    return float(np.clip(np.sum(dx * dy) / denom, -1.0, 1.0))


def permutation_p_value(
    x, y, degree: int = 1, n_permutations: Optional[int] = None, seed: int = 0
) -> float:
    """Share of y-permutations whose fit R² reaches the observed R².

    For degree 1 this is the two-sided test of Pearson's r.
    """
    x, y = _check_inputs(x, y, degree)
    if x.size < 4:
        raise TooFewPoints(f"permutation test needs at least 4 points, got {x.size}")
    n_permutations = n_permutations or settings.PERMUTATIONS
    z, _, _ = _scaled(x)
    residual_maker = np.eye(x.size) - _hat_projection(z, degree)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0

    observed = 1.0 - float(np.sum((residual_maker @ y) ** 2)) / ss_tot
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < n_permutations:
        size = min(PERMUTATION_CHUNK, n_permutations - done)
        shuffled = rng.permuted(np.tile(y, (size, 1)), axis=1)
        ss_res = np.sum((shuffled @ residual_maker.T) ** 2, axis=1)
        hits += int(np.count_nonzero(1.0 - ss_res / ss_tot >= observed - 1e-12))
        done += size
    return max(hits / n_permutations, 1.0 / n_permutations)


def pearson_p_value(x, y, n_permutations: Optional[int] = None, seed: int = 0) -> float:
    return permutation_p_value(x, y, 1, n_permutations, seed)


def polyfit(x, y, degree: int, n_permutations: Optional[int] = None, seed: int = 0) -> FitResult:
    """Least-squares polynomial fit; ``n_permutations=0`` skips the p-value."""
    if degree not in (1, 2):
        raise InvalidParams(f"degree must be 1 or 2, got {degree}")
    x, y = _check_inputs(x, y, degree)
    z, center, scale = _scaled(x)
    design = _design(z, degree)
    gram = design.T @ design
    if np.linalg.matrix_rank(gram) < degree + 1:
        raise Degenerate(f"design matrix of the degree-{degree} fit is rank deficient")
    beta = np.linalg.solve(gram, design.T @ y)

    raw = Polynomial(beta)(Polynomial([-center / scale, 1.0 / scale])).coef
    coefficients = np.zeros(degree + 1)
    coefficients[: raw.size] = raw[: degree + 1]

    fitted = design @ beta
    residuals = y - fitted
    dof = x.size - (degree + 1)
    fit = FitResult(
        degree=degree,
        coefficients=coefficients.tolist(),
        r_squared=r_squared(y, fitted),
        n_points=int(x.size),
        x=x.tolist(),
        y=y.tolist(),
        residuals=residuals.tolist(),
        x_center=center,
        x_scale=scale,
        residual_variance=float(np.sum(residuals**2)) / dof,
        gram_inverse=np.linalg.inv(gram).tolist(),
    )
    if degree == 1:
        fit.pearson_r = pearson_r(x, y)
    elif coefficients[2] < 0:
        fit.vertex = float(-coefficients[1] / (2 * coefficients[2]))
    if n_permutations != 0:
        fit.p_value = permutation_p_value(x, y, degree, n_permutations, seed)
    logger.info(f"Degree-{degree} fit on {x.size} points: coefficients={fit.coefficients} R2={fit.r_squared:.4f}")
    return fit


def evaluate_fit(fit: FitResult, x) -> np.ndarray:
    return P.polyval(np.asarray(x, dtype=np.float64), fit.coefficients)


def confidence_band(fit: FitResult, x_grid, level: float = 0.95) -> Tuple[np.ndarray, np.ndarray]:
    """Pointwise band for the fitted mean; symmetric about the curve."""
    grid = np.asarray(x_grid, dtype=np.float64)
    v = _design((grid - fit.x_center) / fit.x_scale, fit.degree)
    leverage = np.sum((v @ np.asarray(fit.gram_inverse)) * v, axis=1)
    dof = fit.n_points - (fit.degree + 1)
    critical = float(stats.t.ppf((1.0 + level) / 2.0, dof))
    half = critical * np.sqrt(np.clip(fit.residual_variance * leverage, 0.0, None))
    center = evaluate_fit(fit, grid)
    return center - half, center + half


def with_band(fit: FitResult, x_grid, level: float = 0.95) -> FitResult:
    lo, hi = confidence_band(fit, x_grid, level)
    return fit.model_copy(
        update={"band_x": np.asarray(x_grid, dtype=np.float64).tolist(), "band_lo": lo.tolist(), "band_hi": hi.tolist(), "level": level}
    )


def grid_argmax(fit: FitResult, x_grid) -> float:
    grid = np.asarray(x_grid, dtype=np.float64)
    return float(grid[int(np.argmax(evaluate_fit(fit, grid)))])


def is_unimodal(values: Sequence[float], tolerance: float = 1e-12) -> bool:
    """Non-decreasing up to the maximum and non-increasing after it."""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size < 3:
        return True
    peak = int(np.argmax(arr))
    rising = np.all(np.diff(arr[: peak + 1]) >= -tolerance)
    falling = np.all(np.diff(arr[peak:]) <= tolerance)
    return bool(rising and falling)


def rank_correlation(x, y, n_permutations: Optional[int] = None, seed: int = 0) -> Tuple[float, float]:
    """Spearman rho with a one-sided (rho > 0) permutation p-value."""
    rx = stats.rankdata(np.asarray(x, dtype=np.float64))
    ry = stats.rankdata(np.asarray(y, dtype=np.float64))
    if rx.size != ry.size:
        raise ShapeMismatch(f"x and y must have equal length, got {rx.size} and {ry.size}")
    if rx.size < 3:
        raise TooFewPoints(f"rank correlation needs at least 3 points, got {rx.size}")
    rho = pearson_r(rx, ry)
    if np.all(ry == ry[0]) or np.all(rx == rx[0]):
        return 0.0, 1.0

    n_permutations = n_permutations or settings.PERMUTATIONS
    rng = np.random.default_rng(seed)
    cx = rx - rx.mean()
    norm = math.sqrt(float(np.sum(cx * cx)) * float(np.sum((ry - ry.mean()) ** 2)))
    hits, done = 0, 0
    while done < n_permutations:
        size = min(PERMUTATION_CHUNK, n_permutations - done)
        shuffled = rng.permuted(np.tile(ry - ry.mean(), (size, 1)), axis=1)
        hits += int(np.count_nonzero(shuffled @ cx / norm >= rho - 1e-12))
        done += size
    return rho, max(hits / n_permutations, 1.0 / n_permutations)


# ---------------------------------------------------------------------------
# Plot data
# ---------------------------------------------------------------------------


def plot_frame(x, y, fit: Optional[FitResult] = None, level: float = 0.95) -> pd.DataFrame:
    """x, y plus fitted value and band at each x (NaN without a fit)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeMismatch(f"x and y must have equal length, got {x.shape} and {y.shape}")
    frame = pd.DataFrame({"x": x, "y": y})
    if fit is not None and x.size:
        lo, hi = confidence_band(fit, x, level)
        frame["fit"] = evaluate_fit(fit, x)
        frame["band_lo"] = lo
        frame["band_hi"] = hi
    else:
        for column in PLOT_COLUMNS[2:]:
            frame[column] = np.nan
    return frame[PLOT_COLUMNS]


def export_plot_data(series: pd.DataFrame | Dict[str, Sequence[float]], path: str | Path) -> Path:
    """CSV with header x,y,fit,band_lo,band_hi, rows ordered by x, 17 significant digits."""
    if not isinstance(series, pd.DataFrame):
        lengths = {name: len(values) for name, values in series.items()}
        if len(set(lengths.values())) > 1:
            raise ShapeMismatch(f"plot series have inconsistent lengths: {lengths}")
        n = max(lengths.values(), default=0)
        series = pd.DataFrame(
            {c: list(series[c]) if c in series else [math.nan] * n for c in PLOT_COLUMNS}, dtype=np.float64
        )
    missing = [c for c in PLOT_COLUMNS if c not in series.columns]
    if missing:
        raise ShapeMismatch(f"plot series lacks columns {missing}")
    frame = series[PLOT_COLUMNS].sort_values("x", kind="mergesort").reset_index(drop=True)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    return path


def read_plot_data(path: str | Path) -> pd.DataFrame:
    return pd.read_csv(path, dtype=np.float64)
