from decimal import Decimal, localcontext

import numpy as np
import pandas as pd
import pytest

from analysis import (
    PLOT_COLUMNS,
    aggregate_seeds,
    confidence_band,
    evaluate_fit,
    export_plot_data,
    grid_argmax,
    is_unimodal,
    pearson_p_value,
    pearson_r,
    plot_frame,
    polyfit,
    rank_correlation,
    read_plot_data,
    with_band,
)
from errors import Degenerate, EmptyInput, ForgeError, InvalidParams, ShapeMismatch, TooFewPoints

STRENGTHS = np.round(np.arange(1, 10) / 10, 1)


def _noisy_quadratic(seed=0):
    rng = np.random.default_rng(seed)
    y = 0.9 - 1.5 * (STRENGTHS - 0.45) ** 2 + rng.normal(scale=0.01, size=STRENGTHS.size)
    return STRENGTHS, y


def test_aggregate_seeds():
    agg = aggregate_seeds([1.0, 2.0, 3.0])
    assert (agg.n, agg.mean, agg.std, agg.max) == (3, 2.0, 1.0, 3.0)
    single = aggregate_seeds([0.7])
    assert single.std == 0.0 and single.mean == 0.7
    same = aggregate_seeds([0.1] * 5)
    assert same.mean == 0.1 and same.std == 0.0
    with pytest.raises(EmptyInput):
        aggregate_seeds([])


def test_aggregate_seeds_matches_extended_precision_two_pass():
    rng = np.random.default_rng(12)
    with localcontext() as ctx:
        ctx.prec = 60
        for _ in range(50):
            values = rng.uniform(0.3, 0.95, size=10)
            exact = [Decimal(float(v)) for v in values]
            mean = sum(exact) / len(exact)
            std = (sum((v - mean) ** 2 for v in exact) / (len(exact) - 1)).sqrt()
            agg = aggregate_seeds(values)
            assert abs(agg.mean - float(mean)) <= 1e-12
            assert abs(agg.std - float(std)) <= 1e-12


def test_aggregate_seeds_equal_values_are_exact():
    for value in (0.1, 0.7, 1 / 3, 0.9):
        agg = aggregate_seeds([value] * 10)
        assert agg.mean == value == agg.max
        assert agg.std == 0.0


def test_aggregate_mean_never_exceeds_max():
    rng = np.random.default_rng(0)
    for _ in range(100):
        values = rng.uniform(0, 1, size=int(rng.integers(1, 6)))
        agg = aggregate_seeds(values)
        assert agg.mean <= agg.max
        assert agg.std >= 0.0


def test_linear_fit_recovers_exact_line():
    x = np.linspace(0, 1, 9)
    fit = polyfit(x, 2 * x + 1, 1, n_permutations=0)
    assert fit.coefficients == pytest.approx([1.0, 2.0], abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.pearson_r == pytest.approx(1.0)
    assert fit.p_value is None


def test_quadratic_vertex():
    y = 1.0 - (STRENGTHS - 0.4) ** 2
    fit = polyfit(STRENGTHS, y, 2, n_permutations=0)
    assert fit.vertex == pytest.approx(0.4, abs=1e-9)
    assert grid_argmax(fit, np.linspace(0, 1, 101)) == pytest.approx(0.4)


def test_convex_quadratic_has_no_vertex():
    fit = polyfit(STRENGTHS, (STRENGTHS - 0.5) ** 2, 2, n_permutations=0)
    assert fit.vertex is None


@pytest.mark.parametrize("degree", [1, 2])
def test_fit_matches_normal_equations(degree):
    x, y = _noisy_quadratic()
    fit = polyfit(x, y, degree, n_permutations=0)
    design = np.vander(x, degree + 1, increasing=True)
    oracle = np.linalg.solve(design.T @ design, design.T @ y)
    assert np.allclose(fit.coefficients, oracle, atol=1e-9)
    residuals = np.asarray(fit.residuals)
    assert np.allclose(design.T @ residuals, 0.0, atol=1e-10)
    assert np.allclose(evaluate_fit(fit, x) + residuals, y, atol=1e-12)


def test_quadratic_r_squared_not_below_linear():
    for seed in range(100):
        x, y = _noisy_quadratic(seed)
        assert polyfit(x, y, 2, n_permutations=0).r_squared >= polyfit(x, y, 1, n_permutations=0).r_squared - 1e-12


def test_fit_input_errors():
    with pytest.raises(TooFewPoints):
        polyfit([0.1, 0.2, 0.3], [1, 2, 3], 2)
    with pytest.raises(Degenerate):
        polyfit([0.5] * 5, [1, 2, 3, 4, 5], 1)
    with pytest.raises(ShapeMismatch):
        polyfit([0.1, 0.2, 0.3], [1, 2], 1)
    with pytest.raises(InvalidParams):
        polyfit(STRENGTHS, STRENGTHS, 3)


def test_pearson_r_bounds():
    assert pearson_r([1, 2, 3], [1, 2, 3]) == 1.0
    assert pearson_r([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert pearson_r([1, 2, 3], [5, 5, 5]) == 0.0


def test_pearson_r_computes_identical_and_affine_series():
    rng = np.random.default_rng(4)
    for _ in range(20):
        x = rng.normal(size=12)
        assert pearson_r(x, x) == pytest.approx(1.0, abs=1e-15)
        y = 0.5 * x + rng.normal(scale=0.3, size=12)
        assert pearson_r(x, y) == pytest.approx(np.corrcoef(x, y)[0, 1], abs=1e-12)


def test_permutation_p_value_is_floored():
    p = pearson_p_value(STRENGTHS, STRENGTHS * 3, n_permutations=1000, seed=1)
    assert 0.001 <= p <= 0.002


def test_permutation_p_value_is_seeded():
    x, y = _noisy_quadratic()
    assert pearson_p_value(x, y, 500, seed=3) == pearson_p_value(x, y, 500, seed=3)
    flat = np.random.default_rng(5).normal(size=STRENGTHS.size)
    assert pearson_p_value(STRENGTHS, flat, 500, seed=0) > 0.01


def test_band_collapses_on_exact_data():
    x = np.linspace(0, 1, 9)
    fit = polyfit(x, 2 * x + 1, 1, n_permutations=0)
    lo, hi = confidence_band(fit, x)
    assert np.allclose(lo, hi, atol=1e-9)


def test_band_is_symmetric_and_narrowest_at_mean():
    x, y = _noisy_quadratic()
    fit = polyfit(x, y, 1, n_permutations=0)
    grid = np.linspace(0.1, 0.9, 81)
    lo, hi = confidence_band(fit, grid)
    center = evaluate_fit(fit, grid)
    assert np.allclose(hi - center, center - lo, atol=1e-12)
    assert np.all(hi >= lo)
    assert grid[int(np.argmin(hi - lo))] == pytest.approx(float(np.mean(x)))

    banded = with_band(fit, grid, level=0.9)
    assert banded.level == 0.9 and len(banded.band_x) == 81
    assert np.all(np.asarray(banded.band_hi) - np.asarray(banded.band_lo) < hi - lo + 1e-12)


def test_is_unimodal():
    assert is_unimodal([0.5, 0.6, 0.8, 0.7, 0.6])
    assert is_unimodal([0.1, 0.2, 0.3])
    assert is_unimodal([0.4, 0.4])
    assert not is_unimodal([0.5, 0.8, 0.6, 0.9, 0.4])


def test_rank_correlation():
    rho, p = rank_correlation([1, 2, 3, 4, 5, 6], [2, 3, 5, 8, 13, 21], n_permutations=2000)
    assert rho == pytest.approx(1.0)
    assert p <= 0.01
    assert rank_correlation([1, 2, 3], [4, 4, 4]) == (0.0, 1.0)
    with pytest.raises(TooFewPoints):
        rank_correlation([1, 2], [1, 2])


def test_export_empty_series_writes_header_only(tmp_path):
    path = export_plot_data({"x": [], "y": []}, tmp_path / "plot_data.csv")
    assert path.read_text(encoding="utf-8") == ",".join(PLOT_COLUMNS) + "\n"


def test_export_rejects_ragged_series(tmp_path):
    with pytest.raises(ShapeMismatch):
        export_plot_data({"x": [0.1, 0.2], "y": [1.0]}, tmp_path / "plot_data.csv")


def test_export_orders_rows_and_round_trips(tmp_path):
    x, y = _noisy_quadratic()
    fit = polyfit(x, y, 2, n_permutations=0)
    frame = plot_frame(x[::-1], y[::-1], fit)
    path = export_plot_data(frame, tmp_path / "plot_data.csv")
    back = read_plot_data(path)
    assert list(back.columns) == PLOT_COLUMNS
    assert back["x"].is_monotonic_increasing
    expected = frame.sort_values("x").reset_index(drop=True)
    pd.testing.assert_frame_equal(back, expected, check_exact=True)


def test_plot_frame_without_fit_has_nan_columns():
    frame = plot_frame([0.1, 0.2], [0.5, 0.6])
    assert frame[["fit", "band_lo", "band_hi"]].isna().all().all()
