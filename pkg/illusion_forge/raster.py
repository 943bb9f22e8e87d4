"""Scene rasterization, PNG codec and resolution utilities.

Strokes are drawn with 4x supersampling: every segment paints the sub-samples
it covers (butt caps, dashes measured along arc length) in list order, and the
supersampled canvas is box-averaged back with half-up rounding. Pixel centers
sit on integer canvas coordinates.
"""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
import png

from config import settings
from errors import IncompatibleSize, InvalidScene
from geometry import ElementRole, Scene, Segment, validate_scene

logger = logging.getLogger(__name__)

SUPERSAMPLE = settings.SUPERSAMPLE
CHUNK_LENGTH = 24.0  # px of segment handled per bounding-box window

Color = Tuple[int, int, int]


@dataclass(frozen=True)
class Palette:
    reference: Color = (40, 80, 220)
    target: Color = (220, 30, 30)
    context: Color = (0, 0, 0)
    background: Color = (255, 255, 255)

    def for_role(self, role: ElementRole) -> Color:
        return {
            ElementRole.REFERENCE: self.reference,
            ElementRole.TARGET: self.target,
            ElementRole.CONTEXT: self.context,
        }[role]


PALETTE = Palette()


@dataclass(frozen=True, eq=False)
class RasterImage:
    """Row-major 8-bit RGB image; ``pixels`` has shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise IncompatibleSize(f"RasterImage needs a (height, width, 3) array, got shape {arr.shape}")
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @classmethod
    def blank(cls, width: int, height: int, color: Color = PALETTE.background) -> "RasterImage":
        arr = np.empty((height, width, 3), dtype=np.uint8)
        arr[...] = color
        return cls(arr)

    def to_bytes(self) -> bytes:
        return self.pixels.tobytes()

    def equals(self, other: "RasterImage") -> bool:
        return self.pixels.shape == other.pixels.shape and bool(np.array_equal(self.pixels, other.pixels))


# ---------------------------------------------------------------------------
# Rasterization
# ---------------------------------------------------------------------------


def _paint_segment(canvas: np.ndarray, seg: Segment, color: Color, factor: int) -> None:
    ax, ay, bx, by = seg.a.x, seg.a.y, seg.b.x, seg.b.y
    length = math.hypot(bx - ax, by - ay)
    ux, uy = (bx - ax) / length, (by - ay) / length
    half = seg.stroke_width / 2
    rows, cols = canvas.shape[:2]

    n_chunks = max(1, math.ceil(length / CHUNK_LENGTH))
    for k in range(n_chunks):
        t0, t1 = length * k / n_chunks, length * (k + 1) / n_chunks
        px = (ax + ux * t0, ax + ux * t1)
        py = (ay + uy * t0, ay + uy * t1)
        x_lo, x_hi = min(px) - half, max(px) + half
        y_lo, y_hi = min(py) - half, max(py) + half

        # sub-sample index window covering the chunk's bounding box
        c0 = max(0, math.floor((x_lo + 0.5) * factor - 0.5))
        c1 = min(cols, math.ceil((x_hi + 0.5) * factor - 0.5) + 1)
        r0 = max(0, math.floor((y_lo + 0.5) * factor - 0.5))
        r1 = min(rows, math.ceil((y_hi + 0.5) * factor - 0.5) + 1)
        if c0 >= c1 or r0 >= r1:
            continue

        xs = (np.arange(c0, c1, dtype=np.float64) + 0.5) / factor - 0.5 - ax
        ys = (np.arange(r0, r1, dtype=np.float64) + 0.5) / factor - 0.5 - ay
        along = ys[:, None] * uy + xs[None, :] * ux
        perp = ys[:, None] * ux - xs[None, :] * uy
        mask = (along >= 0.0) & (along <= length) & (np.abs(perp) <= half)
        if seg.dash is not None:
            on, off = seg.dash
            mask &= np.mod(along, on + off) < on
        canvas[r0:r1, c0:c1][mask] = color


def _box_mean(arr: np.ndarray, box: int) -> np.ndarray:
    """Per-channel box mean with half-up rounding on integer sums."""
    h, w = arr.shape[0] // box, arr.shape[1] // box
    sums = arr.reshape(h, box, w, box, 3).astype(np.int64).sum(axis=(1, 3))
    n = box * box
    return ((2 * sums + n) // (2 * n)).astype(np.uint8)


def rasterize(scene: Scene, palette: Palette = PALETTE, factor: int = SUPERSAMPLE) -> RasterImage:
    violations = validate_scene(scene)
    if violations:
        raise InvalidScene(violations)

    canvas = np.empty((scene.height * factor, scene.width * factor, 3), dtype=np.uint8)
    canvas[...] = (scene.background,) * 3
    for seg in scene.segments:
        _paint_segment(canvas, seg, palette.for_role(seg.role), factor)
    return RasterImage(_box_mean(canvas, factor))


def downsample(img: RasterImage, target: int) -> RasterImage:
    """Box-filter to ``target``x``target``; each box must be a whole number of pixels."""
    if target <= 0 or img.width % target or img.height % target or img.width != img.height:
        raise IncompatibleSize(f"Cannot box-downsample {img.width}x{img.height} to {target}x{target}")
    box = img.width // target
    if box == 1:
        return RasterImage(img.pixels.copy())
    return RasterImage(_box_mean(img.pixels, box))


# ---------------------------------------------------------------------------
# PNG codec
# ---------------------------------------------------------------------------


def encode_png(img: RasterImage) -> bytes:
    """8-bit RGB PNG, no alpha, no ancillary chunks, fixed zlib level."""
    writer = png.Writer(img.width, img.height, greyscale=False, alpha=False, bitdepth=8, compression=9)
    buffer = io.BytesIO()
    writer.write(buffer, (row.tobytes() for row in img.pixels.reshape(img.height, img.width * 3)))
    return buffer.getvalue()


def decode_png(data: bytes) -> RasterImage:
    width, height, rows, _info = png.Reader(bytes=data).asRGB8()
    arr = np.vstack([np.asarray(row, dtype=np.uint8) for row in rows])
    return RasterImage(arr.reshape(height, width, 3))


def write_png(img: RasterImage, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_png(img))


def read_png(path) -> RasterImage:
    with open(path, "rb") as fh:
        return decode_png(fh.read())


# ---------------------------------------------------------------------------
# Float-image helpers
# ---------------------------------------------------------------------------


def to_luma(img: RasterImage, weights: Sequence[float] = (0.299, 0.587, 0.114)) -> np.ndarray:
    """Grayscale float image in the 0..255 range."""
    return img.pixels.astype(np.float64) @ np.asarray(weights, dtype=np.float64)


def _area_weights(src: int, dst: int) -> np.ndarray:
    # (dst, src) matrix of overlap fractions; rows sum to 1
    scale = src / dst
    edges = np.arange(dst + 1, dtype=np.float64) * scale
    lo = edges[:-1, None]
    hi = edges[1:, None]
    j = np.arange(src, dtype=np.float64)[None, :]
    overlap = np.clip(np.minimum(hi, j + 1) - np.maximum(lo, j), 0.0, None)
    return overlap / scale


def box_resize(arr: np.ndarray, target: int) -> np.ndarray:
    """Area-weighted resize of a 2-D float array to ``target``x``target``."""
    h, w = arr.shape
    if h == target and w == target:
        return arr.astype(np.float64, copy=True)
    if h % target == 0 and w % target == 0:
        bh, bw = h // target, w // target
        return arr.reshape(target, bh, target, bw).mean(axis=(1, 3))
    return _area_weights(h, target) @ arr @ _area_weights(w, target).T


def orientation_histogram(img: RasterImage, bins: int = 16, threshold: float = 0.1) -> np.ndarray:
    """Magnitude-weighted gradient orientations modulo 180°, normalized to shares.

    Pixels whose gradient magnitude is below ``threshold`` times the image
    maximum are ignored.
    """
    luma = to_luma(img)
    gy, gx = np.gradient(luma)
    magnitude = np.hypot(gx, gy)
    peak = float(magnitude.max())
    if peak == 0.0:
        return np.zeros(bins, dtype=np.float64)
    keep = magnitude >= threshold * peak
    angles = np.mod(np.degrees(np.arctan2(gy[keep], gx[keep])), 180.0)
    hist, _ = np.histogram(angles, bins=bins, range=(0.0, 180.0), weights=magnitude[keep])
    return hist / hist.sum()


def occupied_orientation_bins(img: RasterImage, bins: int = 16, min_share: float = 0.02) -> int:
    """Number of orientation bins holding at least ``min_share`` of the gradient mass."""
    return int(np.count_nonzero(orientation_histogram(img, bins) >= min_share))


def ink(img: RasterImage) -> int:
    """Sum of (255 - channel) over every pixel and channel."""
    return int((255 - img.pixels.astype(np.int64)).sum())


def montage(images: Sequence[RasterImage], rows: int, cols: int, gap: int = 8) -> RasterImage:
    """Grid of equally sized images, row-major, separated by white gutters."""
    if not images:
        raise IncompatibleSize("montage needs at least one image")
    if len(images) > rows * cols:
        raise IncompatibleSize(f"{len(images)} images do not fit a {rows}x{cols} grid")
    h, w = images[0].height, images[0].width
    if any(im.height != h or im.width != w for im in images):
        raise IncompatibleSize("montage images must share one size")

    sheet = RasterImage.blank(cols * w + (cols - 1) * gap, rows * h + (rows - 1) * gap)
    arr = sheet.pixels.copy()
    for index, im in enumerate(images):
        r, c = divmod(index, cols)
        y, x = r * (h + gap), c * (w + gap)
        arr[y : y + h, x : x + w] = im.pixels
    return RasterImage(arr)
