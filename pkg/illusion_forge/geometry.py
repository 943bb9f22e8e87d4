"""Continuous 2D primitives and the role-tagged vector scene model.

Coordinates are sub-pixel canvas positions with the Y axis pointing down
(image convention). Discretization only happens in ``raster``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, List, Optional, Tuple

from config import settings
from errors import InvalidGeometry

CANVAS_SIZE = settings.CANVAS_SIZE
MARGIN = settings.CANVAS_MARGIN
MAX_STROKE_WIDTH = 16.0
WHITE = 255


class ElementRole(str, Enum):
    """Role of a segment; decides its color in ``raster``."""

    REFERENCE = "reference"  # blue dotted
    TARGET = "target"  # red solid
    CONTEXT = "context"  # black solid


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidGeometry(f"Point coordinates must be finite, got ({self.x}, {self.y})")

    def translate(self, dx: float, dy: float) -> "Point":
        return Point(self.x + dx, self.y + dy)


@dataclass(frozen=True)
class Segment:
    a: Point
    b: Point
    role: ElementRole
    stroke_width: float
    dash: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if self.a == self.b:
            raise InvalidGeometry(f"Zero-length segment at ({self.a.x}, {self.a.y})")
        if not (math.isfinite(self.stroke_width) and self.stroke_width > 0):
            raise InvalidGeometry(f"Stroke width must be positive, got {self.stroke_width}")
        if self.dash is not None:
            on, off = self.dash
            if not (on > 0 and off > 0):
                raise InvalidGeometry(f"Dash lengths must be positive, got {self.dash}")

    @property
    def length(self) -> float:
        return segment_length(self)

    def reversed(self) -> "Segment":
        return Segment(self.b, self.a, self.role, self.stroke_width, self.dash)

    def with_points(self, a: Point, b: Point) -> "Segment":
        return Segment(a, b, self.role, self.stroke_width, self.dash)


@dataclass(frozen=True)
class SceneViolation:
    index: int  # segment index, -1 for canvas-level problems
    kind: str  # out_of_margin | bad_stroke_width | bad_canvas
    detail: str

    def __str__(self) -> str:
        where = "canvas" if self.index < 0 else f"segment {self.index}"
        return f"{where}: {self.kind} ({self.detail})"


@dataclass(frozen=True)
class Scene:
    width: int = CANVAS_SIZE
    height: int = CANVAS_SIZE
    background: int = WHITE
    segments: Tuple[Segment, ...] = field(default_factory=tuple)

    def by_role(self, *roles: ElementRole) -> Tuple[Segment, ...]:
        return tuple(s for s in self.segments if s.role in roles)

    def without_role(self, role: ElementRole) -> "Scene":
        return Scene(self.width, self.height, self.background, tuple(s for s in self.segments if s.role != role))

    def count(self, role: ElementRole) -> int:
        return sum(1 for s in self.segments if s.role == role)

    def endpoints(self) -> List[Point]:
        points: List[Point] = []
        for s in self.segments:
            points.extend((s.a, s.b))
        return points


def segment_length(s: Segment) -> float:
    return math.hypot(s.b.x - s.a.x, s.b.y - s.a.y)


def _cos_sin(angle: float) -> Tuple[float, float]:
    # exact for quarter turns so 90/180/270 rotations stay on the lattice
    quarter, rest = divmod(angle, 90.0)
    if rest == 0.0:
        return ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))[int(quarter) % 4]
    radians = math.radians(angle)
    return math.cos(radians), math.sin(radians)


def rotate_about(p: Point, center: Point, angle: float) -> Point:
    """Rotate ``p`` by ``angle`` degrees counter-clockwise (in x/y axes) about ``center``.

    With the image Y axis pointing down this appears clockwise on screen.
    """
    if angle == 0.0:
        return p
    c, s = _cos_sin(angle)
    dx, dy = p.x - center.x, p.y - center.y
    return Point(center.x + dx * c - dy * s, center.y + dx * s + dy * c)


def rotate_segment(seg: Segment, center: Point, angle: float) -> Segment:
    return seg.with_points(rotate_about(seg.a, center, angle), rotate_about(seg.b, center, angle))


def transform_scene(scene: Scene, angle: float, center: Point, offset: Tuple[float, float]) -> Scene:
    """Rigid rotation about ``center`` followed by a translation by ``offset``."""
    dx, dy = offset
    moved = []
    for seg in scene.segments:
        a = rotate_about(seg.a, center, angle).translate(dx, dy)
        b = rotate_about(seg.b, center, angle).translate(dx, dy)
        moved.append(seg.with_points(a, b))
    return Scene(scene.width, scene.height, scene.background, tuple(moved))


def bounding_box(points: Iterable[Point]) -> Tuple[float, float, float, float]:
    xs, ys = [], []
    for p in points:
        xs.append(p.x)
        ys.append(p.y)
    if not xs:
        return (0.0, 0.0, 0.0, 0.0)
    return min(xs), min(ys), max(xs), max(ys)


def validate_scene(scene: Scene, margin: float = MARGIN) -> List[SceneViolation]:
    """Return every invariant violation; an empty list means renderable."""
    violations: List[SceneViolation] = []
    if scene.width <= 2 * margin or scene.height <= 2 * margin:
        violations.append(
            SceneViolation(-1, "bad_canvas", f"{scene.width}x{scene.height} leaves no room inside margin {margin}")
        )
    if not 0 <= scene.background <= 255:
        violations.append(SceneViolation(-1, "bad_canvas", f"background level {scene.background}"))

    x_hi = scene.width - margin
    y_hi = scene.height - margin
    for index, seg in enumerate(scene.segments):
        for name, p in (("a", seg.a), ("b", seg.b)):
            if not (margin <= p.x <= x_hi and margin <= p.y <= y_hi):
                violations.append(
                    SceneViolation(index, "out_of_margin", f"{name}=({p.x:.3f}, {p.y:.3f}) outside [{margin}, {x_hi}]")
                )
        if not 0 < seg.stroke_width <= MAX_STROKE_WIDTH:
            violations.append(SceneViolation(index, "bad_stroke_width", f"{seg.stroke_width} not in (0, {MAX_STROKE_WIDTH}]"))
    return violations
