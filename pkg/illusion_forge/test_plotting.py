import numpy as np

from analysis import polyfit
from illusions import IllusionFamily, IllusionParams, generate
from plotting import render_fit_svg, render_montage_svg
from raster import downsample, rasterize


def test_fit_figure_is_byte_stable(tmp_path):
    x = np.round(np.arange(1, 10) / 10, 1)
    y = 0.9 - (x - 0.5) ** 2
    fit = polyfit(x, y, 2, n_permutations=0)
    first = render_fit_svg(x, y, fit, tmp_path / "a.svg", x_label="strength")
    second = render_fit_svg(x, y, fit, tmp_path / "b.svg", x_label="strength")
    data = first.read_bytes()
    assert data.startswith(b"<?xml")
    assert data == second.read_bytes()


def test_points_only_figure(tmp_path):
    path = render_fit_svg([0.1, 0.2], [0.5, 0.4], None, tmp_path / "points.svg")
    assert b"<svg" in path.read_bytes()


def test_montage_figure(tmp_path):
    columns = []
    for family in list(IllusionFamily)[:2]:
        pair = generate(IllusionParams(family, 0.5, 0.5, 0))
        columns.append((family.value, downsample(rasterize(pair.illusory), 32), downsample(rasterize(pair.control), 32)))
    path = render_montage_svg(columns, tmp_path / "montage.svg")
    assert path.is_file() and path.stat().st_size > 0
