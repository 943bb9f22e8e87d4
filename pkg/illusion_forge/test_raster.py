import numpy as np
import pytest

from errors import IncompatibleSize, InvalidScene
from geometry import ElementRole, Point, Scene, Segment
from illusions import IllusionFamily, IllusionParams, generate
from raster import (
    PALETTE,
    RasterImage,
    box_resize,
    decode_png,
    downsample,
    encode_png,
    ink,
    montage,
    occupied_orientation_bins,
    orientation_histogram,
    rasterize,
    to_luma,
)


def test_empty_scene_is_white():
    img = rasterize(Scene())
    assert (img.width, img.height) == (224, 224)
    assert np.all(img.pixels == 255)
    assert len(img.to_bytes()) == 224 * 224 * 3


def test_horizontal_stroke_is_symmetric_and_column_constant():
    seg = Segment(Point(20.0, 112.0), Point(200.0, 112.0), ElementRole.CONTEXT, 3.0)
    img = rasterize(Scene(segments=(seg,)))
    interior = img.pixels[:, 30:190]
    assert np.all(interior == interior[:, :1])
    assert np.all(img.pixels[111:114, 30:190] == 0)
    assert np.all(img.pixels[110, 30:190] == 255)
    assert np.all(img.pixels[114, 30:190] == 255)


def test_roles_use_palette_colors():
    seg = Segment(Point(20.0, 112.0), Point(200.0, 112.0), ElementRole.TARGET, 3.0)
    img = rasterize(Scene(segments=(seg,)))
    assert tuple(img.pixels[112, 100]) == PALETTE.target


def test_invalid_scene_raises():
    seg = Segment(Point(2.0, 100.0), Point(50.0, 100.0), ElementRole.TARGET, 3.0)
    with pytest.raises(InvalidScene) as info:
        rasterize(Scene(segments=(seg,)))
    assert info.value.violations[0].kind == "out_of_margin"


def test_muller_lyer_illusory_has_more_ink():
    for seed in range(5):
        pair = generate(IllusionParams(IllusionFamily.MULLER_LYER, 0.5, 0.5, seed))
        assert ink(rasterize(pair.illusory)) > ink(rasterize(pair.control))


def test_rendering_is_deterministic():
    pair = generate(IllusionParams(IllusionFamily.POGGENDORFF, 0.4, 0.2, 77))
    assert encode_png(rasterize(pair.illusory)) == encode_png(rasterize(pair.illusory))


def test_ink_conserved_under_subpixel_translation():
    base = ink(rasterize(Scene(segments=(Segment(Point(40.0, 60.0), Point(180.0, 150.0), ElementRole.CONTEXT, 2.0),))))
    for shift in (0.13, 0.37, 0.5, 0.81):
        seg = Segment(Point(40.0 + shift, 60.0 + shift / 2), Point(180.0 + shift, 150.0 + shift / 2), ElementRole.CONTEXT, 2.0)
        moved = ink(rasterize(Scene(segments=(seg,))))
        assert abs(moved - base) / base < 0.02


def test_downsample_white_and_box_aligned_block():
    white = RasterImage.blank(224, 224)
    assert np.all(downsample(white, 32).pixels == 255)

    arr = white.pixels.copy()
    arr[7:14, 14:21] = 0
    small = downsample(RasterImage(arr), 32)
    assert tuple(small.pixels[1, 2]) == (0, 0, 0)
    assert int(np.count_nonzero(np.any(small.pixels != 255, axis=2))) == 1


def test_downsample_rejects_non_integer_box():
    with pytest.raises(IncompatibleSize):
        downsample(RasterImage.blank(224, 224), 30)


def test_downsample_preserves_channel_means():
    pair = generate(IllusionParams(IllusionFamily.HERING_WUNDT, 0.6, 0.4, 5))
    img = rasterize(pair.illusory)
    small = downsample(img, 32)
    for channel in range(3):
        assert abs(small.pixels[..., channel].mean() - img.pixels[..., channel].mean()) <= 0.5


def test_png_round_trip():
    rng = np.random.default_rng(0)
    for seed in range(10):
        family = list(IllusionFamily)[seed % 5]
        s, d = (float(v) for v in rng.uniform(0, 1, size=2))
        img = rasterize(generate(IllusionParams(family, s, d, seed)).illusory)
        data = encode_png(img)
        decoded = decode_png(data)
        assert decoded.equals(img)
        assert encode_png(decoded) == data


def test_one_pixel_png():
    img = RasterImage.blank(1, 1)
    decoded = decode_png(encode_png(img))
    assert decoded.pixels.tolist() == [[[255, 255, 255]]]


def test_png_has_no_ancillary_chunks():
    data = encode_png(RasterImage.blank(4, 4))
    chunks, pos = [], 8
    while pos < len(data):
        length = int.from_bytes(data[pos : pos + 4], "big")
        chunks.append(data[pos + 4 : pos + 8].decode("ascii"))
        pos += 12 + length
    assert chunks == ["IHDR", "IDAT", "IEND"]


def test_luma_and_box_resize():
    luma = to_luma(RasterImage.blank(224, 224))
    assert luma.shape == (224, 224)
    assert np.allclose(luma, 255.0)
    assert np.allclose(box_resize(luma, 56), 255.0)
    assert box_resize(np.arange(32 * 32, dtype=float).reshape(32, 32), 56).shape == (56, 56)
    ramp = np.tile(np.arange(224, dtype=float), (224, 1))
    assert box_resize(ramp, 56).mean() == pytest.approx(ramp.mean())


def test_orientation_histogram_is_normalized():
    img = rasterize(generate(IllusionParams(IllusionFamily.ZOLLNER, 0.5, 0.5, 0)).illusory)
    hist = orientation_histogram(img, bins=16)
    assert hist.shape == (16,)
    assert hist.sum() == pytest.approx(1.0)
    assert occupied_orientation_bins(img) >= 2
    assert orientation_histogram(RasterImage.blank(8, 8)).sum() == 0.0


def test_montage_grid_dimensions():
    tile = RasterImage.blank(10, 10, (0, 0, 0))
    sheet = montage([tile] * 10, rows=2, cols=5, gap=2)
    assert (sheet.width, sheet.height) == (5 * 10 + 4 * 2, 2 * 10 + 2)
    assert tuple(sheet.pixels[10, 0]) == (255, 255, 255)
    with pytest.raises(IncompatibleSize):
        montage([tile] * 11, rows=2, cols=5)
