"""Dataset generation, manifests, splits, strength binning and target-set mixing.

Layout on disk::

    <root>/manifest.jsonl
    <root>/<family>/<label>/<id>.png

Manifest paths are relative to the directory holding the manifest.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from errors import DatasetIOError, InsufficientSamples, InvalidFraction, UnbinnableSample
from failure_tracker import failure_tracker
from illusions import IllusionFamily, IllusionParams, generate
from models import DatasetSpec, MixPlan, SampleRecord, SampleSource, Split
from raster import downsample, encode_png, rasterize

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"
BIN_TOLERANCE = 1e-9


# ---------------------------------------------------------------------------
# Identifiers
# ---------------------------------------------------------------------------


def _digest(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "big")


def pair_key(master_seed: int, family: IllusionFamily | str, index: int) -> int:
    """62-bit key shared by the two members of a ScenePair."""
    return _digest(f"pair:{master_seed}:{IllusionFamily.parse(family).value}:{index}") >> 2


def sample_id(key: int, label: int) -> int:
    return 2 * key + label


def stable_id(text: str) -> int:
    """63-bit id for samples that have no pair (target images)."""
    return _digest(f"sample:{text}") >> 1


def record_path(family: str, label: int, ident: int) -> str:
    return f"{family}/{label}/{ident}.png"


# ---------------------------------------------------------------------------
# Manifest I/O
# ---------------------------------------------------------------------------


def write_manifest(records: Iterable[SampleRecord], path: str | Path) -> Path:
    """Write records as JSONL sorted by id; a single writer owns the file."""
    path = Path(path)
    ordered = sorted(records, key=lambda r: r.id)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for record in ordered:
                fh.write(record.to_json_line() + "\n")
    except OSError as exc:
        raise DatasetIOError(f"Could not write manifest {path}: {exc}") from exc
    logger.info(f"Wrote manifest {path} ({len(ordered)} records)")
    return path


def read_manifest(path: str | Path) -> List[SampleRecord]:
    path = Path(path)
    records: List[SampleRecord] = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    records.append(SampleRecord.model_validate_json(line))
                except ValidationError as exc:
                    raise DatasetIOError(f"{path}:{line_no}: malformed manifest row: {exc.errors()[0]['msg']}") from exc
    except OSError as exc:
        raise DatasetIOError(f"Could not read manifest {path}: {exc}") from exc
    return records


def manifest_frame(records: Sequence[SampleRecord]) -> pd.DataFrame:
    columns = list(SampleRecord.model_fields)
    return pd.DataFrame([r.model_dump(mode="json") for r in records], columns=columns)


def family_counts(records: Sequence[SampleRecord]) -> Dict[str, Dict[int, int]]:
    """Per-family tally of labels, e.g. ``{"zollner": {0: 200, 1: 200}}``."""
    frame = manifest_frame(records)
    if frame.empty:
        return {}
    counts: Dict[str, Dict[int, int]] = defaultdict(dict)
    for (family, label), n in frame.groupby(["family", "label"]).size().items():
        counts[str(family)][int(label)] = int(n)
    return dict(counts)


def rebase_records(records: Sequence[SampleRecord], from_root: str | Path, to_root: str | Path) -> List[SampleRecord]:
    """Rewrite relative paths so they resolve from ``to_root``."""
    rebased = []
    for r in records:
        absolute = os.path.join(os.path.abspath(from_root), r.path)
        relative = os.path.relpath(absolute, os.path.abspath(to_root))
        rebased.append(r.model_copy(update={"path": Path(relative).as_posix()}))
    return rebased


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PairJob:
    family: IllusionFamily
    index: int
    key: int
    strength: float
    perception_diff: float
    layout_seed: int
    labels: Tuple[int, ...]
    resolution: int
    root: str
    master_seed: int = 0


def plan_pairs(spec: DatasetSpec, root: str | Path) -> List[PairJob]:
    """Deterministic per-pair parameters; independent of worker count and order."""
    counts = spec.label_counts()
    n_pairs = max(counts.values())
    jobs: List[PairJob] = []
    order = list(IllusionFamily)
    for family_name in spec.families:
        family = IllusionFamily(family_name)
        for index in range(n_pairs):
            rng = np.random.default_rng([spec.master_seed, order.index(family), index])
            if spec.strength.kind == "bins":
                strength = float(spec.strength.bins[index % len(spec.strength.bins)])
            else:
                strength = float(rng.uniform(spec.strength.low, spec.strength.high))
            diff = float(rng.uniform(spec.diff.low, spec.diff.high))
            layout_seed = int(rng.integers(0, 2**64, dtype=np.uint64))
            labels = tuple(label for label in (0, 1) if index < counts[label])
            jobs.append(
                PairJob(
                    family=family,
                    index=index,
                    key=pair_key(spec.master_seed, family, index),
                    strength=strength,
                    perception_diff=diff,
                    layout_seed=layout_seed,
                    labels=labels,
                    resolution=spec.resolution,
                    root=str(root),
                    master_seed=spec.master_seed,
                )
            )
    return jobs


def render_pair(job: PairJob) -> List[SampleRecord]:
    """Render and store the requested members of one ScenePair."""
    pair = generate(IllusionParams(job.family, job.strength, job.perception_diff, job.layout_seed))
    records = []
    for label in job.labels:
        scene = pair.illusory if label == 1 else pair.control
        image = rasterize(scene)
        if job.resolution != image.width:
            image = downsample(image, job.resolution)
        ident = sample_id(job.key, label)
        rel = record_path(job.family.value, label, ident)
        target = Path(job.root) / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "wb") as fh:
            fh.write(encode_png(image))
        records.append(
            SampleRecord(
                id=ident,
                path=rel,
                source=SampleSource.ILLUSION,
                family=job.family.value,
                label=label,
                strength=job.strength,
                perception_diff=job.perception_diff,
            )
        )
    return records


def _render_guarded(job: PairJob) -> List[SampleRecord]:
    try:
        return render_pair(job)
    except Exception as exc:
        failure_tracker.track_generation_failure(job.family.value, job.index, exc, master_seed=job.master_seed)
        raise


def build(spec: DatasetSpec, root: str | Path, jobs: int = 1) -> List[SampleRecord]:
    """Generate every image of ``spec`` under ``root`` and write the manifest."""
    root = Path(root)
    planned = plan_pairs(spec, root)
    logger.info(
        f"Building dataset: {len(spec.families)} families x {max(spec.label_counts().values())} pairs "
        f"(seed {spec.master_seed}, resolution {spec.resolution}, jobs {jobs})"
    )

    records: List[SampleRecord] = []
    try:
        root.mkdir(parents=True, exist_ok=True)
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for chunk in pool.map(_render_guarded, planned, chunksize=max(1, len(planned) // (jobs * 8))):
                    records.extend(chunk)
        else:
            for n, job in enumerate(planned, start=1):
                records.extend(_render_guarded(job))
                if n % 500 == 0:
                    logger.info(f"Rendered {n}/{len(planned)} pairs")
    except OSError as exc:
        raise DatasetIOError(f"Could not write dataset under {root}: {exc}") from exc

    parts = split(records, spec.train_fraction, spec.master_seed)
    records = parts[Split.TRAIN] + parts[Split.TEST]
    write_manifest(records, root / MANIFEST_NAME)
    return sorted(records, key=lambda r: r.id)


# ---------------------------------------------------------------------------
# Splitting, binning, mixing
# ---------------------------------------------------------------------------


def split(records: Sequence[SampleRecord], train_fraction: float, seed: int) -> Dict[Split, List[SampleRecord]]:
    """Stratified by family; both members of a pair share a split.

    Pairs of one family are grouped by the labels they carry (complete pairs
    apart from single-member pairs of an unbalanced spec). Each group is
    ordered by a seeded hash of the pair key and its first
    ``floor(n * train_fraction + 0.5)`` pairs go to train, so every
    (family, label) stratum keeps close to ``train_fraction`` of its samples.
    """
    if not 0.0 < train_fraction < 1.0:
        raise InvalidFraction(f"train fraction must lie in (0, 1), got {train_fraction}")

    pairs: Dict[Tuple[str, int], List[SampleRecord]] = defaultdict(list)
    for r in records:
        pairs[(r.family, r.pair_key)].append(r)

    groups: Dict[Tuple[str, Tuple[int, ...]], List[int]] = defaultdict(list)
    for (family, key), members in pairs.items():
        groups[(family, tuple(sorted(m.label for m in members)))].append(key)

    train_keys = set()
    for (family, _), keys in sorted(groups.items()):
        ordered = sorted(keys, key=lambda k: (_digest(f"split:{seed}:{k}"), k))
        n_train = int(math.floor(len(ordered) * train_fraction + 0.5))
        train_keys.update((family, k) for k in ordered[:n_train])

    parts: Dict[Split, List[SampleRecord]] = {Split.TRAIN: [], Split.TEST: []}
    strata: Dict[Tuple[str, int], Dict[Split, int]] = defaultdict(lambda: {Split.TRAIN: 0, Split.TEST: 0})
    for (family, key), members in pairs.items():
        side = Split.TRAIN if (family, key) in train_keys else Split.TEST
        for r in members:
            parts[side].append(r.model_copy(update={"split": side}))
            strata[(family, r.label)][side] += 1

    for (family, label), sides in sorted(strata.items()):
        if sides[Split.TRAIN] < 1 or sides[Split.TEST] < 1:
            raise InvalidFraction(
                f"train fraction {train_fraction} leaves stratum ({family}, {label}) of "
                f"{sides[Split.TRAIN] + sides[Split.TEST]} samples with "
                f"{sides[Split.TRAIN]} train / {sides[Split.TEST]} test"
            )

    for key in parts:
        parts[key].sort(key=lambda r: r.id)
    return parts


def bin_by_strength(
    records: Sequence[SampleRecord], bins: Sequence[float], tolerance: float = BIN_TOLERANCE
) -> Dict[float, List[SampleRecord]]:
    """Partition illusion samples by their strength bin center."""
    partition: Dict[float, List[SampleRecord]] = {float(b): [] for b in bins}
    centers = list(partition)
    for r in records:
        if r.strength is None:
            raise UnbinnableSample(f"sample {r.id} has no strength (source={r.source.value})")
        matches = [c for c in centers if abs(r.strength - c) <= tolerance]
        if not matches:
            raise UnbinnableSample(f"sample {r.id} has strength {r.strength!r}, not within {tolerance} of any bin {centers}")
        partition[matches[0]].append(r)
    return partition


def bin_by_perception_diff(
    records: Sequence[SampleRecord], n_bins: int, low: float = 0.0, high: float = 1.0
) -> List[Tuple[float, List[SampleRecord]]]:
    """Equal-width perception-difference bins as (center, members) pairs."""
    if n_bins < 1 or not low < high:
        raise InvalidFraction(f"invalid perception_diff binning: n_bins={n_bins}, range=[{low}, {high}]")
    width = (high - low) / n_bins
    groups: List[List[SampleRecord]] = [[] for _ in range(n_bins)]
    for r in records:
        if r.perception_diff is None:
            raise UnbinnableSample(f"sample {r.id} has no perception_diff (source={r.source.value})")
        index = min(max(int((r.perception_diff - low) // width), 0), n_bins - 1)
        groups[index].append(r)
    return [(low + (i + 0.5) * width, members) for i, members in enumerate(groups)]


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def _draw(pool: List[SampleRecord], count: int, rng: np.random.Generator) -> List[SampleRecord]:
    ordered = sorted(pool, key=lambda r: r.id)
    picks = rng.choice(len(ordered), size=count, replace=False) if count else []
    return [ordered[i] for i in sorted(int(i) for i in picks)]


def _max_feasible(n_pos: int, n_neg: int, share: float) -> int:
    if share <= 0.0:
        return n_neg
    if share >= 1.0:
        return n_pos
    total = int(math.floor(min(n_pos / share, n_neg / (1.0 - share)))) + 1
    while total > 0:
        pos = _round_half_up(total * share)
        if pos <= n_pos and total - pos <= n_neg:
            return total
        total -= 1
    return 0


def mix(plan: MixPlan, seed: int) -> List[SampleRecord]:
    """Target manifest plus an illusion subset making up ``illusion_fraction`` of the result.

    The subset is drawn without replacement; its positive share is
    ``positive_share``. ``illusion_fraction == 1`` yields the largest
    illusion-only set with that share.
    """
    f, share = plan.illusion_fraction, plan.positive_share
    target = sorted(plan.target, key=lambda r: r.id)
    if f == 0.0:
        return target
    if f < 1.0 and not target:
        raise InsufficientSamples("mixing needs a non-empty target manifest")

    positives = [r for r in plan.illusion if r.label == 1]
    negatives = [r for r in plan.illusion if r.label == 0]
    if f == 1.0:
        n_illusion = _max_feasible(len(positives), len(negatives), share)
        if n_illusion == 0:
            raise InsufficientSamples("illusion manifest cannot supply any sample at the requested positive share")
        target = []
    else:
        n_illusion = _round_half_up(f * len(target) / (1.0 - f))
    n_pos = _round_half_up(n_illusion * share)
    n_neg = n_illusion - n_pos
    if n_pos > len(positives) or n_neg > len(negatives):
        raise InsufficientSamples(
            f"need {n_pos} positives and {n_neg} negatives, illusion manifest has {len(positives)} and {len(negatives)}"
        )

    rng = np.random.default_rng(seed)
    chosen = _draw(positives, n_pos, rng) + _draw(negatives, n_neg, rng)
    logger.info(f"Mixed {len(target)} target samples with {n_pos} positive and {n_neg} negative illusion samples")
    return sorted(target + chosen, key=lambda r: r.id)


def load_records(manifest_path: str | Path, split_filter: Optional[Split] = None) -> List[SampleRecord]:
    records = read_manifest(manifest_path)
    if split_filter is not None:
        records = [r for r in records if r.split == split_filter]
    return records
