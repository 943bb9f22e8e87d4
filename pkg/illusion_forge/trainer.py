"""Desk-scale reference classifier: a rectifier MLP trained with manual backprop.

The network maps flattened grayscale inputs to the concatenated fusion heads
and is optimized with SGD + momentum under a triangular cyclic learning rate.
Everything that depends on randomness is seeded from ``MlpConfig.seed``; the
only non-deterministic field of a ``TrainRun`` is ``metadata``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import DatasetIOError, EmptyManifest, InvalidParams, ShapeMismatch
from fusion import (
    LabelSpace,
    SampleOrigin,
    batch_terms,
    encode_label,
    encode_targets,
    illusion_decision,
    origin_for,
    restrict_object_logits,
)
from models import (
    TARGET_FAMILY,
    DepthSweepRow,
    EvalMetrics,
    FamilyMetrics,
    FusionMode,
    MlpConfig,
    PreprocSpec,
    RunMetadata,
    SampleRecord,
    TrainRun,
)
from raster import box_resize, read_png, to_luma

logger = logging.getLogger(__name__)

PARAMS_FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# Learning-rate schedule
# ---------------------------------------------------------------------------


class CyclicLR:
    """Cyclical learning rate.

    ``step_size`` is half a cycle in iterations. Scale modes:

    - triangular: constant amplitude
    - triangular2: amplitude halves every cycle
    - exp_range: amplitude decays as ``gamma ** iteration``
    """

    def __init__(self, base_lr: float, max_lr: float, step_size: float, mode: str = "triangular", gamma: float = 1.0):
        self.base_lr = base_lr
        self.max_lr = max_lr
        self.step_size = step_size
        self.mode = mode
        self.gamma = gamma

        if self.mode == "triangular":
            self.scale_fn = lambda x: 1.0
        elif self.mode == "triangular2":
            self.scale_fn = lambda x: 1 / (2.0 ** (x - 1))
        elif self.mode == "exp_range":
            self.scale_fn = lambda x: self.gamma**x
        else:
            raise InvalidParams(f"Unknown cyclic LR mode {mode!r}")

    def lr_at(self, iteration: int) -> float:
        cycle = math.floor(1 + iteration / (2 * self.step_size))
        x = abs(iteration / self.step_size - 2 * cycle + 1)
        scale = self.scale_fn(iteration) if self.mode == "exp_range" else self.scale_fn(cycle)
        return self.base_lr + (self.max_lr - self.base_lr) * max(0.0, 1 - x) * scale

    @classmethod
    def from_config(cls, config: MlpConfig) -> "CyclicLR":
        return cls(config.base_lr, config.max_lr, config.cycle_length / 2, config.scale_mode, config.gamma)


# ---------------------------------------------------------------------------
# Network
# ---------------------------------------------------------------------------


@dataclass
class ForwardCache:
    activations: List[np.ndarray]  # input of every affine layer
    pre_activations: List[np.ndarray]  # hidden-layer affine outputs


class Mlp:
    """Stack of affine layers with rectifiers between them; the last layer feeds every head."""

    def __init__(self, input_dim: int, hidden: Sequence[int], head_dims: Sequence[int], seed: Optional[int] = 0):
        self.input_dim = int(input_dim)
        self.hidden = [int(w) for w in hidden]
        self.head_dims = [int(d) for d in head_dims]
        sizes = [self.input_dim] + self.hidden + [sum(self.head_dims)]

        rng = np.random.default_rng(seed)
        self.weights: List[np.ndarray] = []
        self.biases: List[np.ndarray] = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            self.weights.append(rng.standard_normal((fan_in, fan_out)) * math.sqrt(2.0 / fan_in))
            self.biases.append(np.zeros(fan_out))

    @property
    def n_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def parameters(self) -> List[np.ndarray]:
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend((w, b))
        return params

    def parameter_names(self) -> List[str]:
        names = []
        for i in range(len(self.weights)):
            names.extend((f"W{i}", f"b{i}"))
        return names

    def forward(self, x: np.ndarray) -> Tuple[List[np.ndarray], ForwardCache]:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ShapeMismatch(f"expected inputs of shape (B, {self.input_dim}), got {x.shape}")
        activations, pre = [x], []
        a = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            z = a @ w + b
            pre.append(z)
            a = np.maximum(z, 0.0)
            activations.append(a)
        out = a @ self.weights[-1] + self.biases[-1]
        heads = np.split(out, np.cumsum(self.head_dims)[:-1], axis=1)
        return heads, ForwardCache(activations, pre)

    def predict(self, x: np.ndarray, batch_size: int = 512) -> List[np.ndarray]:
        chunks: List[List[np.ndarray]] = []
        for start in range(0, len(x), batch_size):
            heads, _ = self.forward(x[start : start + batch_size])
            chunks.append(heads)
        if not chunks:
            return [np.zeros((0, d)) for d in self.head_dims]
        return [np.concatenate([c[h] for c in chunks], axis=0) for h in range(len(self.head_dims))]

    def backward(self, cache: ForwardCache, head_grads: Sequence[np.ndarray]) -> List[np.ndarray]:
        """Gradients in ``parameters()`` order, given dLoss/dlogits per head."""
        delta = np.concatenate(head_grads, axis=1)
        grads: List[np.ndarray] = []
        for layer in range(len(self.weights) - 1, -1, -1):
            a_prev = cache.activations[layer]
            grads.append(delta.sum(axis=0))
            grads.append(a_prev.T @ delta)
            if layer > 0:
                delta = (delta @ self.weights[layer].T) * (cache.pre_activations[layer - 1] > 0.0)
        grads.reverse()
        return grads

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_flat(self, flat: np.ndarray) -> None:
        offset = 0
        for p in self.parameters():
            p[...] = flat[offset : offset + p.size].reshape(p.shape)
            offset += p.size

    def digest(self) -> str:
        h = hashlib.sha256()
        for p in self.parameters():
            h.update(np.ascontiguousarray(p, dtype="<f8").tobytes())
        return h.hexdigest()

    def save(self, path: str | Path) -> Path:
        """Flat little-endian float64 payload behind a length-prefixed JSON header."""
        tensors, offset = [], 0
        for name, p in zip(self.parameter_names(), self.parameters()):
            tensors.append({"name": name, "shape": list(p.shape), "offset": offset})
            offset += p.size
        header = json.dumps(
            {
                "version": PARAMS_FORMAT_VERSION,
                "dtype": "<f8",
                "input_dim": self.input_dim,
                "hidden": self.hidden,
                "head_dims": self.head_dims,
                "tensors": tensors,
            },
            separators=(",", ":"),
        ).encode("utf-8")
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(struct.pack("<Q", len(header)))
            fh.write(header)
            fh.write(self.get_flat().astype("<f8").tobytes())
        return path

    @classmethod
    def load(cls, path: str | Path) -> "Mlp":
        with open(path, "rb") as fh:
            (length,) = struct.unpack("<Q", fh.read(8))
            header = json.loads(fh.read(length).decode("utf-8"))
            payload = np.frombuffer(fh.read(), dtype="<f8").astype(np.float64)
        model = cls(header["input_dim"], header["hidden"], header["head_dims"], seed=0)
        if payload.size != model.n_parameters:
            raise ShapeMismatch(f"{path}: payload holds {payload.size} values, architecture needs {model.n_parameters}")
        model.set_flat(payload)
        return model


# ---------------------------------------------------------------------------
# Inputs and labels
# ---------------------------------------------------------------------------


def load_inputs(records: Sequence[SampleRecord], root: str | Path, preproc: PreprocSpec) -> np.ndarray:
    """PNG -> luma -> area resize -> [0, 1], flattened row-major."""
    root = Path(root)
    out = np.empty((len(records), preproc.input_dim), dtype=np.float64)
    for i, record in enumerate(records):
        try:
            image = read_png(root / record.path)
        except OSError as exc:
            raise DatasetIOError(f"Could not read {root / record.path}: {exc}") from exc
        luma = to_luma(image, preproc.luma_weights)
        out[i] = (box_resize(luma, preproc.size) / 255.0).ravel()
    return out


def infer_n_classes(records: Sequence[SampleRecord], illusion_as_target: bool = False) -> int:
    labels = [r.label for r in records if not r.is_illusion or illusion_as_target]
    return max(labels) + 1 if labels else 1


def encode_records(space: LabelSpace, records: Sequence[SampleRecord], illusion_as_target: bool = False):
    origins = [origin_for(r, illusion_as_target) for r in records]
    targets = encode_targets(space, [encode_label(space, o) for o in origins])
    return origins, targets


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def _rate(hits: np.ndarray) -> Optional[float]:
    return float(np.mean(hits)) if hits.size else None


def compute_metrics(
    space: LabelSpace,
    head_logits: Sequence[np.ndarray],
    origins: Sequence[SampleOrigin],
    families: Optional[Sequence[str]] = None,
    illusion_as_target: bool = False,
    loss: Optional[float] = None,
) -> EvalMetrics:
    """Top-k, recall and illusion accuracy from head outputs.

    With ``illusion_as_target`` the object head is a 2-class illusion
    classifier and illusion metrics are read from it.
    """
    n = len(origins)
    if n == 0:
        raise EmptyManifest("cannot compute metrics on zero samples")
    families = list(families) if families is not None else [TARGET_FAMILY if o.is_target else "illusion" for o in origins]
    object_logits = restrict_object_logits(space, head_logits)
    object_pred = np.argmax(object_logits, axis=1)

    is_target = np.array([o.is_target and families[i] == TARGET_FAMILY for i, o in enumerate(origins)])
    truth = np.array([o.value for o in origins], dtype=np.int64)

    metrics = EvalMetrics(n_samples=n, n_target=int(is_target.sum()), n_illusion=int((~is_target).sum()), loss=loss)

    if is_target.any():
        k = min(5, space.n)
        rows = np.flatnonzero(is_target)
        top_k = np.argsort(-object_logits[rows], axis=1, kind="stable")[:, :k]
        metrics.top1 = _rate(object_pred[rows] == truth[rows])
        metrics.top5 = _rate(np.any(top_k == truth[rows, None], axis=1))
        recalls = {}
        for cls in np.unique(truth[rows]):
            members = rows[truth[rows] == cls]
            recalls[str(int(cls))] = float(np.mean(object_pred[members] == cls))
        metrics.per_class_recall = recalls
        metrics.macro_recall = float(np.mean(list(recalls.values())))

    ill_rows = np.flatnonzero(~is_target)
    if ill_rows.size:
        if illusion_as_target or space.mode == FusionMode.BASE:
            decision = object_pred
        else:
            decision = illusion_decision(space, head_logits)
        hits = decision[ill_rows] == truth[ill_rows]
        positives = ill_rows[truth[ill_rows] == 1]
        metrics.illusion_accuracy = _rate(hits)
        metrics.illusion_recall = _rate(decision[positives] == 1)
        share = float(np.mean(truth[ill_rows] == 1))
        metrics.majority_baseline = max(share, 1.0 - share)

        per_family: Dict[str, FamilyMetrics] = {}
        fam = np.array([families[i] for i in ill_rows])
        for name in sorted(set(fam.tolist())):
            members = ill_rows[fam == name]
            pos = members[truth[members] == 1]
            per_family[name] = FamilyMetrics(
                n=int(members.size),
                accuracy=float(np.mean(decision[members] == truth[members])),
                recall=_rate(decision[pos] == 1),
            )
        metrics.per_family = per_family
    return metrics


def evaluate_arrays(
    model: Mlp,
    space: LabelSpace,
    x: np.ndarray,
    origins: Sequence[SampleOrigin],
    targets: np.ndarray,
    families: Optional[Sequence[str]] = None,
    illusion_as_target: bool = False,
) -> EvalMetrics:
    if len(origins) == 0:
        raise EmptyManifest("evaluation set is empty")
    heads = model.predict(x)
    loss = batch_terms(space, heads, targets).total
    return compute_metrics(space, heads, origins, families, illusion_as_target, loss)


def evaluate(
    model: Mlp,
    records: Sequence[SampleRecord],
    root: str | Path,
    space: LabelSpace,
    preproc: PreprocSpec,
    illusion_as_target: bool = False,
) -> EvalMetrics:
    if not records:
        raise EmptyManifest("evaluation manifest is empty")
    x = load_inputs(records, root, preproc)
    origins, targets = encode_records(space, records, illusion_as_target)
    return evaluate_arrays(model, space, x, origins, targets, [r.family for r in records], illusion_as_target)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


@dataclass
class ArraySet:
    """Preprocessed inputs with their encoded fusion targets."""

    x: np.ndarray
    targets: np.ndarray
    origins: List[SampleOrigin]
    families: List[str]

    def __len__(self) -> int:
        return len(self.origins)

    @classmethod
    def from_records(
        cls,
        records: Sequence[SampleRecord],
        root: str | Path,
        space: LabelSpace,
        preproc: PreprocSpec,
        illusion_as_target: bool = False,
    ) -> "ArraySet":
        origins, targets = encode_records(space, records, illusion_as_target)
        return cls(load_inputs(records, root, preproc), targets, origins, [r.family for r in records])


def fit(
    config: MlpConfig,
    space: LabelSpace,
    train_set: ArraySet,
    preproc: PreprocSpec,
    eval_set: Optional[ArraySet] = None,
    illusion_as_target: bool = False,
) -> Tuple[TrainRun, Mlp]:
    """Train on preprocessed arrays; per-epoch metrics use ``eval_set`` or the train set."""
    if len(train_set) == 0:
        raise EmptyManifest("training set is empty")
    input_dim = train_set.x.shape[1]
    if config.input_dim is not None and config.input_dim != input_dim:
        raise ShapeMismatch(f"model input_dim {config.input_dim} does not match preprocessed inputs ({input_dim})")
    config = config.model_copy(update={"input_dim": input_dim})

    started = datetime.now().isoformat(timespec="seconds")
    clock = time.perf_counter()

    model = Mlp(input_dim, config.hidden, space.dims, seed=config.seed)
    schedule = CyclicLR.from_config(config)
    velocity = [np.zeros_like(p) for p in model.parameters()]
    monitor = eval_set if eval_set is not None else train_set

    run = TrainRun(mode=space.mode, n_classes=space.n, config=config, preproc=preproc)
    iteration = 0
    n = len(train_set)
    for epoch in range(config.epochs):
        order = np.random.default_rng([config.seed, epoch]).permutation(n)
        weighted_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            heads, cache = model.forward(train_set.x[idx])
            terms = batch_terms(space, heads, train_set.targets[idx])
            grads = model.backward(cache, terms.gradients)
            lr = schedule.lr_at(iteration)
            for p, v, g in zip(model.parameters(), velocity, grads):
                v *= config.momentum
                v -= lr * g
                p += v
            weighted_loss += terms.total * len(idx)
            iteration += 1

        run.epoch_losses.append(weighted_loss / n)
        metrics = evaluate_arrays(
            model, space, monitor.x, monitor.origins, monitor.targets, monitor.families, illusion_as_target
        )
        run.epoch_metrics.append(metrics)
        logger.info(
            f"[{space.mode.value} seed={config.seed} depth={config.depth}] epoch {epoch + 1}/{config.epochs} "
            f"loss={run.epoch_losses[-1]:.4f} recall={metrics.headline_recall}"
        )

    run.parameters_digest = model.digest()
    run.metadata = RunMetadata(started_at=started, wall_clock_seconds=round(time.perf_counter() - clock, 3))
    return run, model


def train(
    config: MlpConfig,
    records: Sequence[SampleRecord],
    root: str | Path,
    space: LabelSpace,
    preproc: PreprocSpec,
    eval_records: Optional[Sequence[SampleRecord]] = None,
    eval_root: Optional[str | Path] = None,
    illusion_as_target: bool = False,
) -> Tuple[TrainRun, Mlp]:
    train_set = ArraySet.from_records(records, root, space, preproc, illusion_as_target)
    eval_set = None
    if eval_records:
        eval_set = ArraySet.from_records(eval_records, eval_root or root, space, preproc, illusion_as_target)
    return fit(config, space, train_set, preproc, eval_set, illusion_as_target)


# ---------------------------------------------------------------------------
# Depth sweep and gradient check
# ---------------------------------------------------------------------------


def epochs_to_threshold(run: TrainRun, threshold: float) -> Optional[int]:
    """First 1-based epoch whose headline recall reaches ``threshold``; None means never."""
    for epoch, metrics in enumerate(run.epoch_metrics, start=1):
        recall = metrics.headline_recall
        if recall is not None and recall >= threshold:
            return epoch
    return None


def _depth_job(args) -> DepthSweepRow:
    config, depth, width, space, train_set, eval_set, preproc, threshold, task, illusion_as_target = args
    cfg = config.model_copy(update={"hidden": [width] * depth})
    run, _ = fit(cfg, space, train_set, preproc, eval_set, illusion_as_target)
    final = run.epoch_metrics[-1] if run.epoch_metrics else None
    return DepthSweepRow(
        task=task,
        depth=depth,
        seed=cfg.seed,
        epochs_to_threshold=epochs_to_threshold(run, threshold),
        final_recall=final.headline_recall if final else None,
        final_loss=run.epoch_losses[-1] if run.epoch_losses else None,
    )


def depth_sweep(
    config: MlpConfig,
    depths: Sequence[int],
    space: LabelSpace,
    train_set: ArraySet,
    preproc: PreprocSpec,
    eval_set: Optional[ArraySet] = None,
    threshold: float = 0.9,
    width: int = 64,
    task: str = "illusion",
    illusion_as_target: bool = False,
    jobs: int = 1,
) -> List[DepthSweepRow]:
    """One run per depth; runs share every hyperparameter except the hidden stack."""
    if not 0.0 < threshold < 1.0:
        raise InvalidParams(f"threshold must lie in (0, 1), got {threshold}")
    work = [(config, d, width, space, train_set, eval_set, preproc, threshold, task, illusion_as_target) for d in depths]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(work))) as pool:
            rows = list(pool.map(_depth_job, work))
    else:
        rows = [_depth_job(w) for w in work]
    for row in rows:
        logger.info(f"Depth sweep [{task}] depth={row.depth} epochs_to_threshold={row.epochs_to_threshold}")
    return rows


def total_gradient(model: Mlp, space: LabelSpace, x: np.ndarray, targets: np.ndarray) -> Tuple[float, np.ndarray]:
    heads, cache = model.forward(x)
    terms = batch_terms(space, heads, targets)
    grads = model.backward(cache, terms.gradients)
    return terms.total, np.concatenate([g.ravel() for g in grads])


def gradient_check(
    model: Mlp,
    space: LabelSpace,
    x: np.ndarray,
    targets: np.ndarray,
    n_params: int = 200,
    h: float = 1e-4,
    seed: int = 0,
) -> float:
    """Max relative error between backprop and central differences on a random parameter subset."""
    _, analytic = total_gradient(model, space, x, targets)
    flat = model.get_flat()
    rng = np.random.default_rng(seed)
    subset = rng.choice(flat.size, size=min(n_params, flat.size), replace=False)

    worst = 0.0
    for i in subset:
        original = flat[i]
        flat[i] = original + h
        model.set_flat(flat)
        plus = batch_terms(space, model.forward(x)[0], targets).total
        flat[i] = original - h
        model.set_flat(flat)
        minus = batch_terms(space, model.forward(x)[0], targets).total
        flat[i] = original
        numeric = (plus - minus) / (2 * h)
        a = analytic[i]
        worst = max(worst, abs(a - numeric) / max(abs(a) + abs(numeric), 1e-6))
    model.set_flat(flat)
    return worst
