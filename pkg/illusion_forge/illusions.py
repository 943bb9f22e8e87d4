"""Parametric generators for the five geometric-illusion families.

Each generator maps ``IllusionParams`` to a ``ScenePair``: the illusory scene
(label 1) and a control (label 0) obtained by deleting every Context segment,
so both scenes share the Reference and Target segments bit for bit.

Recipe constants (all in canvas pixels or degrees):

=====================  =========================================================
Hering & Wundt         parallels w = 40 + 60d apart, length 120 + 60d;
                       round(8 + 24s) rays through the center over 180°
Müller-Lyer            shafts 60 apart, 100 and 100·(1 + 0.4d) long;
                       20 px fins at half-angle 15° + 45s
Poggendorff            parallels g = 30 + 60d apart; transversal at
                       20° + 40s from horizontal, drawn outside the gap
Vertical-Horizontal    horizontal arm 120, vertical column 120·(1 + 0.4(d - 0.5))
                       whose lowest 40 px are the junction stroke, standing
                       at abscissa fraction 0.1 + 0.8s
Zöllner                4 parallels 36 apart; 24 px strokes every 18 px at
                       90° - 55s from the line, phase (d - 0.5)·18
=====================  =========================================================
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Tuple

import numpy as np

from errors import InvalidGeometry, InvalidParams
from geometry import (
    CANVAS_SIZE,
    MARGIN,
    ElementRole,
    Point,
    Scene,
    Segment,
    bounding_box,
    rotate_about,
    transform_scene,
)

logger = logging.getLogger(__name__)

TARGET_WIDTH = 3.0
CONTEXT_WIDTH = 2.0
REFERENCE_WIDTH = 2.0
REFERENCE_DASH = (4.0, 4.0)

ORIENTATION_JITTER = 15.0
CENTER_JITTER = 10.0
ROTATION_BACKOFF = (1.0, 0.75, 0.5, 0.25, 0.0)

CENTER = Point(CANVAS_SIZE / 2, CANVAS_SIZE / 2)

HW_RAY_HALF_LENGTH = 96.0
ML_DELTA_MAX = 0.4
ML_FIN_LENGTH = 20.0
POGG_PIECE_MAX = 60.0
VH_ARM = 120.0
VH_JUNCTION = 40.0
ZOLLNER_SPACING = 36.0
ZOLLNER_STROKE = 24.0
ZOLLNER_STEP = 18.0


class IllusionFamily(str, Enum):
    """The five families, in manifest order."""

    HERING_WUNDT = "hering_wundt"
    MULLER_LYER = "muller_lyer"
    POGGENDORFF = "poggendorff"
    VERTICAL_HORIZONTAL = "vertical_horizontal"
    ZOLLNER = "zollner"

    @classmethod
    def parse(cls, text: "str | IllusionFamily") -> "IllusionFamily":
        if isinstance(text, IllusionFamily):
            return text
        key = str(text).strip().lower().replace("-", "_").replace(" ", "_")
        key = _ALIASES.get(key, key)
        try:
            return cls(key)
        except ValueError:
            allowed = ", ".join(f.value for f in cls)
            raise InvalidParams(f"family: unknown illusion family {text!r} (expected one of {allowed})")


_ALIASES = {
    "hering": "hering_wundt",
    "wundt": "hering_wundt",
    "hering_and_wundt": "hering_wundt",
    "muller": "muller_lyer",
    "mueller": "muller_lyer",
    "mueller_lyer": "muller_lyer",
    "müller_lyer": "muller_lyer",
    "pogg": "poggendorff",
    "vh": "vertical_horizontal",
    "vertical": "vertical_horizontal",
    "zoellner": "zollner",
    "zöllner": "zollner",
}


@dataclass(frozen=True)
class IllusionParams:
    family: IllusionFamily
    strength: float
    perception_diff: float
    layout_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "family", IllusionFamily.parse(self.family))
        for name in ("strength", "perception_diff"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and 0.0 <= value <= 1.0):
                raise InvalidParams(f"{name}: must lie in [0, 1], got {value!r}")
            object.__setattr__(self, name, float(value))
        if not (0 <= int(self.layout_seed) < 2**64):
            raise InvalidParams(f"layout_seed: must be a 64-bit unsigned integer, got {self.layout_seed!r}")
        object.__setattr__(self, "layout_seed", int(self.layout_seed))


@dataclass(frozen=True)
class ScenePair:
    illusory: Scene
    control: Scene


@dataclass(frozen=True)
class FamilyDoc:
    family: IllusionFamily
    description: str
    source: str
    diff: str


FAMILY_DOCS: Dict[IllusionFamily, FamilyDoc] = {
    IllusionFamily.HERING_WUNDT: FamilyDoc(
        IllusionFamily.HERING_WUNDT,
        "Two parallel lines intersected by radiating segments",
        "Angle and density of radiating lines",
        "Distance and length of parallels",
    ),
    IllusionFamily.MULLER_LYER: FamilyDoc(
        IllusionFamily.MULLER_LYER,
        "Two identical parallel lines terminated by inward/outward arrowheads",
        "Arrow angle",
        "Line length",
    ),
    IllusionFamily.POGGENDORFF: FamilyDoc(
        IllusionFamily.POGGENDORFF,
        "Oblique line interrupted by two parallels",
        "Oblique angle",
        "Gap width between parallels",
    ),
    IllusionFamily.VERTICAL_HORIZONTAL: FamilyDoc(
        IllusionFamily.VERTICAL_HORIZONTAL,
        "L-shaped figure with equal horizontal and vertical arms",
        "Position of intersection point",
        "Arm lengths",
    ),
    IllusionFamily.ZOLLNER: FamilyDoc(
        IllusionFamily.ZOLLNER,
        "Parallel lines overlaid with short oblique strokes",
        "Stroke angle relative to vertical",
        "Stroke intersection position",
    ),
}


def family_parameter_doc(family: IllusionFamily | str) -> FamilyDoc:
    return FAMILY_DOCS[IllusionFamily.parse(family)]


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def _p(x: float, y: float) -> Point:
    return Point(x, y)


def _target(a: Point, b: Point) -> Segment:
    return Segment(a, b, ElementRole.TARGET, TARGET_WIDTH)


def _context(a: Point, b: Point) -> Segment:
    return Segment(a, b, ElementRole.CONTEXT, CONTEXT_WIDTH)


def _reference(a: Point, b: Point) -> Segment:
    return Segment(a, b, ElementRole.REFERENCE, REFERENCE_WIDTH, REFERENCE_DASH)


# ---------------------------------------------------------------------------
# Family recipes. Each returns the illusory segments centered on the canvas,
# drawn in order Context, Target, Reference.
# ---------------------------------------------------------------------------


def hering_ray_count(strength: float) -> int:
    return _round_half_up(8 + 24 * strength)


def _hering_wundt(s: float, d: float) -> List[Segment]:
    cx, cy = CENTER.x, CENTER.y
    gap = 40 + 60 * d
    length = 120 + 60 * d
    xl, xr = cx - gap / 2, cx + gap / 2
    top, bottom = cy - length / 2, cy + length / 2

    segments = []
    n_rays = hering_ray_count(s)
    for k in range(n_rays):
        theta = math.radians(k * 180.0 / n_rays)
        ux, uy = math.cos(theta), math.sin(theta)
        r = HW_RAY_HALF_LENGTH
        segments.append(_context(_p(cx - r * ux, cy - r * uy), _p(cx + r * ux, cy + r * uy)))

    for x in (xl, xr):
        segments.append(_target(_p(x, top), _p(x, bottom)))
    for x in (xl, xr):
        segments.append(_reference(_p(x, top), _p(x, bottom)))
    return segments


def muller_lyer_half_angle(strength: float) -> float:
    return 15.0 + 45.0 * strength


def _fins(end: Point, outward: Tuple[float, float], half_angle: float, splay_out: bool) -> List[Segment]:
    # splay_out=False: fins fold back over the shaft (arrow tip at the end)
    sign = 1.0 if splay_out else -1.0
    fins = []
    for turn in (half_angle, -half_angle):
        c, s = math.cos(math.radians(turn)), math.sin(math.radians(turn))
        vx = outward[0] * c - outward[1] * s
        vy = outward[0] * s + outward[1] * c
        fins.append(_context(end, _p(end.x + sign * ML_FIN_LENGTH * vx, end.y + sign * ML_FIN_LENGTH * vy)))
    return fins


def _muller_lyer(s: float, d: float) -> List[Segment]:
    cx, cy = CENTER.x, CENTER.y
    half_angle = muller_lyer_half_angle(s)
    len1 = 100.0
    len2 = 100.0 * (1 + d * ML_DELTA_MAX)
    y1, y2 = cy - 30, cy + 30

    shaft1 = (_p(cx - len1 / 2, y1), _p(cx + len1 / 2, y1))
    shaft2 = (_p(cx - len2 / 2, y2), _p(cx + len2 / 2, y2))

    segments: List[Segment] = []
    for (left, right), splay in ((shaft1, False), (shaft2, True)):
        segments.extend(_fins(left, (-1.0, 0.0), half_angle, splay))
        segments.extend(_fins(right, (1.0, 0.0), half_angle, splay))
    segments.append(_target(*shaft1))
    segments.append(_target(*shaft2))
    for x in (cx - len1 / 2, cx + len1 / 2):
        segments.append(_reference(_p(x, y1), _p(x, y2)))
    return segments


def poggendorff_angle(strength: float) -> float:
    return 20.0 + 40.0 * strength


def _poggendorff(s: float, d: float) -> List[Segment]:
    cx, cy = CENTER.x, CENTER.y
    alpha = math.radians(poggendorff_angle(s))
    gap = 30 + 60 * d
    ux, uy = math.cos(alpha), -math.sin(alpha)  # rising to the right

    edge = gap / 2 + CONTEXT_WIDTH / 2
    t0 = edge / math.cos(alpha)
    reach = 96.0
    piece = min(POGG_PIECE_MAX, reach / math.sin(alpha) - t0, reach / math.cos(alpha) - t0)
    half_height = max(60.0, t0 * math.sin(alpha) + 12.0)

    def at(t: float) -> Point:
        return _p(cx + t * ux, cy + t * uy)

    segments = [
        _context(_p(cx - gap / 2, cy - half_height), _p(cx - gap / 2, cy + half_height)),
        _context(_p(cx + gap / 2, cy - half_height), _p(cx + gap / 2, cy + half_height)),
        _target(at(-t0 - piece), at(-t0)),
        _target(at(t0), at(t0 + piece)),
        _reference(at(-t0), at(t0)),
    ]
    return segments


def vertical_arm_length(perception_diff: float) -> float:
    return VH_ARM * (1 + (perception_diff - 0.5) * 0.4)


def _vertical_horizontal(s: float, d: float) -> List[Segment]:
    # the visible vertical column is the junction stroke plus the vertical arm
    cx, cy = CENTER.x, CENTER.y
    vertical = vertical_arm_length(d)
    t = 0.1 + 0.8 * s
    base_y = cy + vertical / 2
    xj = cx - VH_ARM / 2 + t * VH_ARM
    foot_y = base_y - VH_JUNCTION

    return [
        _context(_p(xj, base_y), _p(xj, foot_y)),
        _target(_p(cx - VH_ARM / 2, base_y), _p(cx + VH_ARM / 2, base_y)),
        _target(_p(xj, foot_y), _p(xj, base_y - vertical)),
    ]


def zollner_stroke_angle(strength: float) -> float:
    """Angle between each stroke and its parallel, in degrees."""
    return 90.0 - 55.0 * strength


def _zollner(s: float, d: float) -> List[Segment]:
    cx, cy = CENTER.x, CENTER.y
    phi = math.radians(zollner_stroke_angle(s))
    half_line = 84.0
    half_stroke = ZOLLNER_STROKE / 2
    phase = (d - 0.5) * ZOLLNER_STEP

    strokes: List[Segment] = []
    lines: List[Segment] = []
    for i in range(4):
        x = cx + (i - 1.5) * ZOLLNER_SPACING
        sign = 1.0 if i % 2 == 0 else -1.0
        vx, vy = sign * math.sin(phi), math.cos(phi)
        for k in range(9):
            y = cy + (k - 4) * ZOLLNER_STEP + phase
            strokes.append(_context(_p(x - half_stroke * vx, y - half_stroke * vy), _p(x + half_stroke * vx, y + half_stroke * vy)))
        lines.append(_target(_p(x, cy - half_line), _p(x, cy + half_line)))
    return strokes + lines


_BUILDERS: Dict[IllusionFamily, Callable[[float, float], List[Segment]]] = {
    IllusionFamily.HERING_WUNDT: _hering_wundt,
    IllusionFamily.MULLER_LYER: _muller_lyer,
    IllusionFamily.POGGENDORFF: _poggendorff,
    IllusionFamily.VERTICAL_HORIZONTAL: _vertical_horizontal,
    IllusionFamily.ZOLLNER: _zollner,
}


# ---------------------------------------------------------------------------
# Layout jitter
# ---------------------------------------------------------------------------


def _fit_layout(scene: Scene, angle: float, jitter: Tuple[float, float]) -> Tuple[float, Tuple[float, float]]:
    """Largest rotation (from ROTATION_BACKOFF) whose endpoints fit, with clamped offsets."""
    eps = 1e-9
    lo_bound = MARGIN + eps
    hi_x = scene.width - MARGIN - eps
    hi_y = scene.height - MARGIN - eps
    points = scene.endpoints()
    for factor in ROTATION_BACKOFF:
        trial = angle * factor
        x0, y0, x1, y1 = bounding_box(rotate_about(p, CENTER, trial) for p in points)
        dx_lo, dx_hi = lo_bound - x0, hi_x - x1
        dy_lo, dy_hi = lo_bound - y0, hi_y - y1
        if dx_lo <= dx_hi and dy_lo <= dy_hi:
            dx = min(max(jitter[0], dx_lo), dx_hi)
            dy = min(max(jitter[1], dy_lo), dy_hi)
            return trial, (dx, dy)
    raise InvalidGeometry(f"Scene does not fit the {scene.width}x{scene.height} canvas inside margin {MARGIN}")


def generate(params: IllusionParams) -> ScenePair:
    """Deterministic in (family, strength, perception_diff, layout_seed)."""
    rng = np.random.default_rng(params.layout_seed)
    angle = float(rng.uniform(-ORIENTATION_JITTER, ORIENTATION_JITTER))
    jitter = (float(rng.uniform(-CENTER_JITTER, CENTER_JITTER)), float(rng.uniform(-CENTER_JITTER, CENTER_JITTER)))

    raw = Scene(segments=tuple(_BUILDERS[params.family](params.strength, params.perception_diff)))
    angle, offset = _fit_layout(raw, angle, jitter)
    illusory = transform_scene(raw, angle, CENTER, offset)
    control = illusory.without_role(ElementRole.CONTEXT)
    return ScenePair(illusory=illusory, control=control)


def describe_params(params: IllusionParams) -> Dict[str, float]:
    """Physical quantities implied by (s, d) for the family."""
    s, d = params.strength, params.perception_diff
    family = params.family
    if family is IllusionFamily.HERING_WUNDT:
        return {"ray_count": float(hering_ray_count(s)), "parallel_gap_px": 40 + 60 * d, "parallel_length_px": 120 + 60 * d}
    if family is IllusionFamily.MULLER_LYER:
        return {"fin_half_angle_deg": muller_lyer_half_angle(s), "shaft_length_ratio": 1 + d * ML_DELTA_MAX}
    if family is IllusionFamily.POGGENDORFF:
        return {"oblique_angle_deg": poggendorff_angle(s), "gap_px": 30 + 60 * d}
    if family is IllusionFamily.VERTICAL_HORIZONTAL:
        return {"intersection_fraction": 0.1 + 0.8 * s, "vertical_column_px": vertical_arm_length(d), "horizontal_arm_px": VH_ARM}
    return {"stroke_angle_deg": zollner_stroke_angle(s), "stroke_phase_px": (d - 0.5) * ZOLLNER_STEP}
