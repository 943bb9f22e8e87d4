"""Stand-in object-classification sets for the target side of label fusion.

``blobs`` renders colored-blob classes (class identity = ring position plus
stroke color), ``digits`` renders seven-segment numerals used as the control
task of the depth study, and ``load_folder_dataset`` reads any
folder-per-class PNG tree.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import List

import numpy as np

from dataset import MANIFEST_NAME, split, stable_id, write_manifest
from errors import DatasetIOError, EmptyManifest
from geometry import ElementRole, Point, Scene, Segment, transform_scene
from illusions import CENTER
from models import TARGET_FAMILY, SampleRecord, SampleSource, Split
from raster import downsample, rasterize, write_png

logger = logging.getLogger(__name__)

BLOB_RING_RADIUS = 60.0
BLOB_JITTER = 6.0
BLOB_ROLES = (ElementRole.TARGET, ElementRole.CONTEXT, ElementRole.REFERENCE)

# Seven-segment layout: (x0, y0, x1, y1) in a 0..1 x 0..2 cell
_SEGMENTS = {
    "a": (0, 0, 1, 0),
    "b": (1, 0, 1, 1),
    "c": (1, 1, 1, 2),
    "d": (0, 2, 1, 2),
    "e": (0, 1, 0, 2),
    "f": (0, 0, 0, 1),
    "g": (0, 1, 1, 1),
}
_DIGITS = ["abcdef", "bc", "abged", "abgcd", "fgbc", "afgcd", "afgedc", "abc", "abcdefg", "abcdfg"]


def blob_scene(k: int, n_classes: int, rng: np.random.Generator) -> Scene:
    """Three thick strokes clustered at ring position ``k``, colored by ``k % 3``."""
    theta = 2 * math.pi * k / n_classes
    cx = CENTER.x + BLOB_RING_RADIUS * math.cos(theta) + rng.uniform(-BLOB_JITTER, BLOB_JITTER)
    cy = CENTER.y + BLOB_RING_RADIUS * math.sin(theta) + rng.uniform(-BLOB_JITTER, BLOB_JITTER)
    role = BLOB_ROLES[k % len(BLOB_ROLES)]
    segments = []
    for _ in range(3):
        angle = rng.uniform(0.0, math.pi)
        half = rng.uniform(8.0, 12.0)
        width = rng.uniform(10.0, 14.0)
        dx, dy = half * math.cos(angle), half * math.sin(angle)
        segments.append(Segment(Point(cx - dx, cy - dy), Point(cx + dx, cy + dy), role, width))
    return Scene(segments=tuple(segments))


def digit_scene(digit: int, rng: np.random.Generator) -> Scene:
    """Seven-segment numeral with rigid position and rotation jitter."""
    scale = 40.0
    x0, y0 = CENTER.x - scale / 2, CENTER.y - scale
    segments = []
    for name in _DIGITS[digit]:
        ax, ay, bx, by = _SEGMENTS[name]
        segments.append(
            Segment(
                Point(x0 + ax * scale, y0 + ay * scale),
                Point(x0 + bx * scale, y0 + by * scale),
                ElementRole.CONTEXT,
                6.0,
            )
        )
    angle = float(rng.uniform(-10.0, 10.0))
    offset = (float(rng.uniform(-30.0, 30.0)), float(rng.uniform(-30.0, 30.0)))
    return transform_scene(Scene(segments=tuple(segments)), angle, CENTER, offset)


def _render_classes(root: Path, prefix: str, n_classes: int, per_class: int, seed: int, resolution: int, make_scene) -> None:
    for k in range(n_classes):
        folder = root / f"{prefix}_{k:03d}"
        folder.mkdir(parents=True, exist_ok=True)
        for i in range(per_class):
            rng = np.random.default_rng([seed, k, i])
            image = rasterize(make_scene(k, rng))
            if resolution != image.width:
                image = downsample(image, resolution)
            write_png(image, folder / f"{i:05d}.png")


def load_folder_dataset(root: str | Path) -> List[SampleRecord]:
    """Read a folder-per-class PNG tree; class index follows sorted folder names."""
    root = Path(root)
    try:
        class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    except OSError as exc:
        raise DatasetIOError(f"Could not list target folder {root}: {exc}") from exc

    records: List[SampleRecord] = []
    for k, folder in enumerate(class_dirs):
        for image_path in sorted(folder.glob("*.png")):
            rel = image_path.relative_to(root).as_posix()
            records.append(
                SampleRecord(
                    id=stable_id(f"{TARGET_FAMILY}/{rel}"),
                    path=rel,
                    source=SampleSource.TARGET,
                    family=TARGET_FAMILY,
                    label=k,
                )
            )
    if not records:
        raise EmptyManifest(f"No class folders with PNG images under {root}")
    logger.info(f"Loaded {len(records)} target images in {len(class_dirs)} classes from {root}")
    return records


def _finish(root: Path, train_fraction: float, seed: int) -> List[SampleRecord]:
    records = load_folder_dataset(root)
    parts = split(records, train_fraction, seed)
    records = parts[Split.TRAIN] + parts[Split.TEST]
    write_manifest(records, root / MANIFEST_NAME)
    return sorted(records, key=lambda r: r.id)


def generate_blob_targets(
    root: str | Path, n_classes: int, per_class: int, seed: int, train_fraction: float = 0.8, resolution: int = 224
) -> List[SampleRecord]:
    root = Path(root)
    try:
        _render_classes(root, "class", n_classes, per_class, seed, resolution, lambda k, rng: blob_scene(k, n_classes, rng))
    except OSError as exc:
        raise DatasetIOError(f"Could not write blob targets under {root}: {exc}") from exc
    return _finish(root, train_fraction, seed)


def generate_digit_set(
    root: str | Path, per_class: int, seed: int, train_fraction: float = 0.8, resolution: int = 224
) -> List[SampleRecord]:
    root = Path(root)
    try:
        _render_classes(root, "digit", len(_DIGITS), per_class, seed, resolution, digit_scene)
    except OSError as exc:
        raise DatasetIOError(f"Could not write digit set under {root}: {exc}") from exc
    return _finish(root, train_fraction, seed)
