import math

import numpy as np
import pytest

from errors import InvalidParams
from geometry import ElementRole, segment_length
from illusions import (
    IllusionFamily,
    IllusionParams,
    describe_params,
    family_parameter_doc,
    generate,
    hering_ray_count,
)


def _direction(seg):
    length = segment_length(seg)
    return (seg.b.x - seg.a.x) / length, (seg.b.y - seg.a.y) / length


def test_family_order_is_fixed():
    assert [f.value for f in IllusionFamily] == [
        "hering_wundt",
        "muller_lyer",
        "poggendorff",
        "vertical_horizontal",
        "zollner",
    ]


@pytest.mark.parametrize(
    "text,family",
    [
        ("hering", IllusionFamily.HERING_WUNDT),
        ("Muller-Lyer", IllusionFamily.MULLER_LYER),
        ("mueller", IllusionFamily.MULLER_LYER),
        ("pogg", IllusionFamily.POGGENDORFF),
        ("vh", IllusionFamily.VERTICAL_HORIZONTAL),
        ("zoellner", IllusionFamily.ZOLLNER),
    ],
)
def test_family_aliases(text, family):
    assert IllusionFamily.parse(text) is family


def test_unknown_family_rejected():
    with pytest.raises(InvalidParams):
        IllusionFamily.parse("ponzo")


@pytest.mark.parametrize("s,d", [(-0.1, 0.5), (1.5, 0.5), (0.5, -0.01), (0.5, 1.01), (float("nan"), 0.5)])
def test_out_of_range_params_rejected(s, d):
    with pytest.raises(InvalidParams):
        IllusionParams(IllusionFamily.ZOLLNER, s, d, 0)


def test_muller_lyer_equal_shafts_at_zero_diff():
    pair = generate(IllusionParams(IllusionFamily.MULLER_LYER, 0.5, 0.0, 7))
    shafts = pair.illusory.by_role(ElementRole.TARGET)
    assert len(shafts) == 2
    assert segment_length(shafts[0]) == pytest.approx(segment_length(shafts[1]), abs=1e-9)
    assert pair.illusory.count(ElementRole.CONTEXT) == 8
    assert pair.control.count(ElementRole.CONTEXT) == 0


def test_zollner_strokes_perpendicular_at_zero_strength():
    pair = generate(IllusionParams(IllusionFamily.ZOLLNER, 0.0, 0.3, 1))
    line = _direction(pair.illusory.by_role(ElementRole.TARGET)[0])
    for stroke in pair.illusory.by_role(ElementRole.CONTEXT):
        sx, sy = _direction(stroke)
        assert abs(sx * line[0] + sy * line[1]) < 1e-9


def test_hering_ray_count():
    pair = generate(IllusionParams(IllusionFamily.HERING_WUNDT, 0.5, 0.5, 42))
    assert hering_ray_count(0.5) == 20
    assert pair.illusory.count(ElementRole.CONTEXT) == 20


def test_family_parameter_doc_text():
    pogg = family_parameter_doc(IllusionFamily.POGGENDORFF)
    assert (pogg.source, pogg.diff) == ("Oblique angle", "Gap width between parallels")
    vh = family_parameter_doc("vertical_horizontal")
    assert (vh.source, vh.diff) == ("Position of intersection point", "Arm lengths")
    zollner = family_parameter_doc(IllusionFamily.ZOLLNER)
    assert (zollner.source, zollner.diff) == ("Stroke angle relative to vertical", "Stroke intersection position")


@pytest.mark.parametrize("family", list(IllusionFamily))
def test_generation_is_deterministic(family):
    params = IllusionParams(family, 0.37, 0.61, 2024)
    first, second = generate(params), generate(params)
    assert first.illusory.segments == second.illusory.segments
    assert first.control.segments == second.control.segments


@pytest.mark.parametrize("family", list(IllusionFamily))
def test_control_purity_and_matched_geometry(family):
    rng = np.random.default_rng(5)
    for seed in range(1000):
        s, d = (float(v) for v in rng.uniform(0, 1, size=2))
        pair = generate(IllusionParams(family, s, d, seed))
        assert pair.control.count(ElementRole.CONTEXT) == 0
        assert pair.illusory.count(ElementRole.CONTEXT) > 0
        assert pair.illusory.by_role(ElementRole.REFERENCE, ElementRole.TARGET) == pair.control.segments


@pytest.mark.parametrize("family", [IllusionFamily.HERING_WUNDT, IllusionFamily.ZOLLNER])
def test_context_mass_non_decreasing_in_strength(family):
    counts = [generate(IllusionParams(family, s, 0.5, 3)).illusory.count(ElementRole.CONTEXT) for s in np.linspace(0, 1, 21)]
    assert all(a <= b for a, b in zip(counts, counts[1:]))


def test_muller_lyer_diff_faithfulness():
    for d in np.linspace(0, 1, 11):
        pair = generate(IllusionParams(IllusionFamily.MULLER_LYER, 0.3, float(d), 9))
        first, second = (segment_length(s) for s in pair.illusory.by_role(ElementRole.TARGET))
        assert abs(second - first) / first == pytest.approx(float(d) * 0.4, abs=1e-6)


def test_vertical_horizontal_control_arms_detached():
    pair = generate(IllusionParams(IllusionFamily.VERTICAL_HORIZONTAL, 0.5, 0.5, 0))
    horizontal, vertical = pair.control.by_role(ElementRole.TARGET)
    gap = math.hypot(vertical.a.x - horizontal.a.x, vertical.a.y - horizontal.a.y)
    assert gap > 0
    junction = pair.illusory.by_role(ElementRole.CONTEXT)[0]
    assert segment_length(junction) == pytest.approx(40.0, abs=1e-9)


@pytest.mark.parametrize("d", [0.0, 0.25, 0.5, 0.75, 1.0])
def test_vertical_horizontal_visible_column_tracks_diff(d):
    pair = generate(IllusionParams(IllusionFamily.VERTICAL_HORIZONTAL, 0.3, d, 11))
    (junction,) = pair.illusory.by_role(ElementRole.CONTEXT)
    horizontal, vertical = pair.illusory.by_role(ElementRole.TARGET)
    assert junction.b == vertical.a
    assert _direction(junction) == pytest.approx(_direction(vertical), abs=1e-9)
    column = segment_length(junction) + segment_length(vertical)
    assert segment_length(horizontal) == pytest.approx(120.0, abs=1e-9)
    assert column / segment_length(horizontal) == pytest.approx(1 + 0.4 * (d - 0.5), abs=1e-9)


def test_describe_params_reports_family_quantities():
    ml = describe_params(IllusionParams(IllusionFamily.MULLER_LYER, 1.0, 0.5, 0))
    assert ml["fin_half_angle_deg"] == pytest.approx(60.0)
    assert ml["shaft_length_ratio"] == pytest.approx(1.2)
    pogg = describe_params(IllusionParams(IllusionFamily.POGGENDORFF, 0.5, 0.5, 0))
    assert pogg["gap_px"] == pytest.approx(60.0)
