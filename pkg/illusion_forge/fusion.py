"""Label spaces and cross-entropy losses for the Base/Single/Multi/Mix strategies.

Head layouts for ``n`` object classes:

======  ==========  ===================================================
mode    heads       encoding
======  ==========  ===================================================
base    [n]         Target(k) -> k
single  [n + 2]     Target(k) -> k, Illusion(b) -> n + b
multi   [n, 2]      Target(k) -> (k, -), Illusion(b) -> (-, b)
mix     [n + 1, 2]  Target(k) -> (k, -), Illusion(1) -> (n, 1),
                    Illusion(0) -> (-, 0)
======  ==========  ===================================================

Index ``n`` of the Single head is "non-illusion" and ``n + 1`` is "illusion".
Inapplicable heads (``-``) contribute zero loss and zero gradient. Batch
reductions are means.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import EmptyBatch, IndexOutOfRange, InvalidClass, LabelMismatch, ShapeMismatch
from models import FusionMode, SampleRecord

INAPPLICABLE = -1


@dataclass(frozen=True)
class SampleOrigin:
    kind: str  # "target" | "illusion"
    value: int

    @classmethod
    def target(cls, k: int) -> "SampleOrigin":
        return cls("target", int(k))

    @classmethod
    def illusion(cls, presence: int) -> "SampleOrigin":
        return cls("illusion", int(presence))

    @property
    def is_target(self) -> bool:
        return self.kind == "target"


@dataclass(frozen=True)
class LabelSpace:
    mode: FusionMode
    n: int

    def __post_init__(self):
        object.__setattr__(self, "mode", FusionMode(self.mode))
        if self.n < 1:
            raise InvalidClass(f"label space needs at least one object class, got n={self.n}")

    @property
    def dims(self) -> List[int]:
        return head_dims(self.mode, self.n)

    @property
    def total_logits(self) -> int:
        return sum(self.dims)


@dataclass(frozen=True)
class FusionLabel:
    indices: Tuple[Optional[int], ...]

    @property
    def applicable(self) -> Tuple[bool, ...]:
        return tuple(i is not None for i in self.indices)

    def as_targets(self) -> List[int]:
        return [INAPPLICABLE if i is None else i for i in self.indices]


@dataclass
class LossReport:
    total: float
    components: List[float]
    gradients: List[np.ndarray] = field(default_factory=list)

    def to_dict(self) -> Dict[str, object]:
        return {
            "total": float(self.total),
            "components": [float(c) for c in self.components],
            "gradients": [np.asarray(g, dtype=np.float64).tolist() for g in self.gradients],
        }


def head_dims(mode: FusionMode | str, n: int) -> List[int]:
    mode = FusionMode(mode)
    if mode == FusionMode.BASE:
        return [n]
    if mode == FusionMode.SINGLE:
        return [n + 2]
    if mode == FusionMode.MULTI:
        return [n, 2]
    return [n + 1, 2]


def _check_origin(space: LabelSpace, origin: SampleOrigin) -> None:
    if origin.is_target:
        if not 0 <= origin.value < space.n:
            raise InvalidClass(f"object class {origin.value} outside [0, {space.n})")
    elif origin.value not in (0, 1):
        raise InvalidClass(f"illusion presence must be 0 or 1, got {origin.value}")


def encode_label(space: LabelSpace, origin: SampleOrigin) -> FusionLabel:
    _check_origin(space, origin)
    k, n, mode = origin.value, space.n, space.mode
    if mode == FusionMode.BASE:
        if not origin.is_target:
            raise InvalidClass("base mode has no illusion output; map illusion samples to object classes first")
        return FusionLabel((k,))
    if mode == FusionMode.SINGLE:
        return FusionLabel((k,) if origin.is_target else (n + k,))
    if mode == FusionMode.MULTI:
        return FusionLabel((k, None) if origin.is_target else (None, k))
    if origin.is_target:
        return FusionLabel((k, None))
    return FusionLabel((n, 1) if k == 1 else (None, 0))


def origin_for(record: SampleRecord, illusion_as_target: bool = False) -> SampleOrigin:
    """Manifest row -> origin; ``illusion_as_target`` treats presence as a 2-class object label."""
    if record.is_illusion and not illusion_as_target:
        return SampleOrigin.illusion(record.label)
    return SampleOrigin.target(record.label)


# ---------------------------------------------------------------------------
# Softmax and cross-entropy
# ---------------------------------------------------------------------------


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def logsumexp(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    m = z.max(axis=-1, keepdims=True)
    return (m + np.log(np.exp(z - m).sum(axis=-1, keepdims=True)))[..., 0]


def cross_entropy(logits, target_index: int) -> Tuple[float, np.ndarray]:
    """``-log softmax(logits)[target]`` and its gradient ``softmax - onehot``."""
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 1 or z.size == 0:
        raise ShapeMismatch(f"cross_entropy expects a non-empty logit vector, got shape {z.shape}")
    if not 0 <= target_index < z.size:
        raise IndexOutOfRange(f"target index {target_index} outside [0, {z.size})")
    loss = float(logsumexp(z) - z[target_index])
    grad = softmax(z)
    grad[target_index] -= 1.0
    return loss, grad


# ---------------------------------------------------------------------------
# Per-sample and batch losses
# ---------------------------------------------------------------------------


def _check_label(space: LabelSpace, label: FusionLabel) -> None:
    dims = space.dims
    if len(label.indices) != len(dims):
        raise LabelMismatch(f"{space.mode.value} label needs {len(dims)} head entries, got {len(label.indices)}")
    if not any(label.applicable):
        raise LabelMismatch("label has no applicable head")
    if space.mode in (FusionMode.BASE, FusionMode.SINGLE) and not all(label.applicable):
        raise LabelMismatch(f"{space.mode.value} labels must always supervise their single head")
    for index, dim in zip(label.indices, dims):
        if index is not None and not 0 <= index < dim:
            raise IndexOutOfRange(f"label index {index} outside head of size {dim}")


def loss(space: LabelSpace, head_logits: Sequence, label: FusionLabel) -> LossReport:
    dims = space.dims
    if len(head_logits) != len(dims):
        raise ShapeMismatch(f"{space.mode.value} expects {len(dims)} heads, got {len(head_logits)}")
    arrays = [np.asarray(z, dtype=np.float64) for z in head_logits]
    for z, dim in zip(arrays, dims):
        if z.shape != (dim,):
            raise ShapeMismatch(f"head logits of shape {z.shape} do not match head size {dim}")
    _check_label(space, label)

    components, gradients = [], []
    for z, index in zip(arrays, label.indices):
        if index is None:
            components.append(0.0)
            gradients.append(np.zeros_like(z))
        else:
            value, grad = cross_entropy(z, index)
            components.append(value)
            gradients.append(grad)
    total = 0.0
    for value in components:
        total += value
    return LossReport(total=total, components=components, gradients=gradients)


def batch_loss(space: LabelSpace, batch: Sequence[Tuple[Sequence, FusionLabel]]) -> LossReport:
    """Mean of per-sample totals, components and gradients."""
    if len(batch) == 0:
        raise EmptyBatch("batch_loss needs at least one sample")
    reports = [loss(space, logits, label) for logits, label in batch]
    totals = np.array([r.total for r in reports])
    components = np.array([r.components for r in reports])
    gradients = [np.mean(np.stack([r.gradients[h] for r in reports]), axis=0) for h in range(len(space.dims))]
    return LossReport(
        total=float(np.mean(totals)),
        components=[float(c) for c in np.mean(components, axis=0)],
        gradients=gradients,
    )


@dataclass
class BatchTerms:
    total: float
    per_sample: np.ndarray  # (B,) totals
    components: np.ndarray  # (heads,) batch-mean per head
    gradients: List[np.ndarray]  # per head (B, dim), already divided by B


def encode_targets(space: LabelSpace, labels: Sequence[FusionLabel]) -> np.ndarray:
    """(B, heads) integer targets with ``INAPPLICABLE`` for masked heads."""
    for label in labels:
        _check_label(space, label)
    return np.array([label.as_targets() for label in labels], dtype=np.int64).reshape(len(labels), len(space.dims))


def batch_terms(space: LabelSpace, head_logits: Sequence[np.ndarray], targets: np.ndarray) -> BatchTerms:
    """Vectorized ``batch_loss`` over (B, dim) logit blocks and encoded targets."""
    dims = space.dims
    if len(head_logits) != len(dims):
        raise ShapeMismatch(f"{space.mode.value} expects {len(dims)} heads, got {len(head_logits)}")
    targets = np.asarray(targets, dtype=np.int64)
    batch = targets.shape[0]
    if batch == 0:
        raise EmptyBatch("batch_terms needs at least one sample")
    if targets.shape != (batch, len(dims)):
        raise LabelMismatch(f"targets of shape {targets.shape} do not match ({batch}, {len(dims)})")

    rows = np.arange(batch)
    per_head = np.zeros((batch, len(dims)))
    gradients = []
    for h, (z, dim) in enumerate(zip(head_logits, dims)):
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (batch, dim):
            raise ShapeMismatch(f"head {h} logits of shape {z.shape} do not match ({batch}, {dim})")
        t = targets[:, h]
        mask = t != INAPPLICABLE
        if np.any(t[mask] >= dim) or np.any(t < INAPPLICABLE):
            raise IndexOutOfRange(f"head {h} targets outside [0, {dim})")
        safe = np.where(mask, t, 0)
        per_head[:, h] = np.where(mask, logsumexp(z) - z[rows, safe], 0.0)
        grad = softmax(z)
        grad[rows, safe] -= 1.0
        grad[~mask] = 0.0
        gradients.append(grad / batch)

    per_sample = per_head.sum(axis=1)
    return BatchTerms(
        total=float(np.mean(per_sample)),
        per_sample=per_sample,
        components=per_head.mean(axis=0),
        gradients=gradients,
    )


# ---------------------------------------------------------------------------
# Decisions extracted from head outputs
# ---------------------------------------------------------------------------


def restrict_object_logits(space: LabelSpace, head_logits: Sequence[np.ndarray]) -> np.ndarray:
    """Object-class logits (first ``n`` entries of head 0), for Base-comparable top-k."""
    return np.asarray(head_logits[0], dtype=np.float64)[..., : space.n]


def illusion_decision(space: LabelSpace, head_logits: Sequence[np.ndarray]) -> np.ndarray:
    """Binary illusion prediction per sample (1 = illusion)."""
    if space.mode == FusionMode.BASE:
        raise LabelMismatch("base mode has no illusion output")
    if space.mode == FusionMode.SINGLE:
        pair = np.asarray(head_logits[0], dtype=np.float64)[..., space.n : space.n + 2]
        return np.argmax(pair, axis=-1)
    return np.argmax(np.asarray(head_logits[1], dtype=np.float64), axis=-1)
