from __future__ import annotations

import json
import math
import tomllib
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from errors import InvalidSpec
from illusions import IllusionFamily

STRENGTH_BINS = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
TARGET_FAMILY = "target"


class SampleSource(str, Enum):
    ILLUSION = "illusion"
    TARGET = "target"


class Split(str, Enum):
    TRAIN = "train"
    TEST = "test"


class FusionMode(str, Enum):
    BASE = "base"
    SINGLE = "single"
    MULTI = "multi"
    MIX = "mix"


# ---------------------------------------------------------------------------
# Manifest rows
# ---------------------------------------------------------------------------


class SampleRecord(BaseModel):
    """One manifest row. Field order is the JSONL key order."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    id: int
    path: str
    source: SampleSource
    family: str
    label: int
    strength: Optional[float] = None
    perception_diff: Optional[float] = None
    split: Split = Split.TRAIN

    @model_validator(mode="after")
    def _check_origin(self):
        if self.source == SampleSource.ILLUSION:
            if self.family not in {f.value for f in IllusionFamily}:
                raise ValueError(f"illusion sample {self.id} has unknown family {self.family!r}")
            if self.label not in (0, 1):
                raise ValueError(f"illusion sample {self.id} has non-binary label {self.label}")
            if self.strength is None or self.perception_diff is None:
                raise ValueError(f"illusion sample {self.id} must carry strength and perception_diff")
        else:
            if self.family != TARGET_FAMILY:
                raise ValueError(f"target sample {self.id} must have family 'target', got {self.family!r}")
            if self.label < 0:
                raise ValueError(f"target sample {self.id} has negative class index {self.label}")
            if self.strength is not None or self.perception_diff is not None:
                raise ValueError(f"target sample {self.id} must not carry strength/perception_diff")
        return self

    @property
    def pair_key(self) -> int:
        return self.id >> 1

    @property
    def mate_id(self) -> int:
        return self.id ^ 1

    @property
    def is_illusion(self) -> bool:
        return self.source == SampleSource.ILLUSION

    def to_json_line(self) -> str:
        return json.dumps(self.model_dump(mode="json"), ensure_ascii=False, separators=(",", ":"))


# ---------------------------------------------------------------------------
# Dataset construction
# ---------------------------------------------------------------------------


class StrengthSampling(BaseModel):
    """Either a uniform range or a fixed list of bin centers cycled by pair index."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["uniform", "bins"] = "uniform"
    low: float = Field(0.0, ge=0.0, le=1.0)
    high: float = Field(1.0, ge=0.0, le=1.0)
    bins: List[float] = Field(default_factory=lambda: list(STRENGTH_BINS))

    @model_validator(mode="after")
    def _check(self):
        if self.low > self.high:
            raise ValueError(f"strength range is empty: low={self.low} > high={self.high}")
        if self.kind == "bins":
            if not self.bins:
                raise ValueError("bin sampling needs at least one bin")
            if any(not 0.0 <= b <= 1.0 for b in self.bins):
                raise ValueError(f"strength bins must lie in [0, 1], got {self.bins}")
        return self


class DiffSampling(BaseModel):
    model_config = ConfigDict(extra="forbid")

    low: float = Field(0.1, ge=0.0, le=1.0)
    high: float = Field(0.9, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _check(self):
        if self.low > self.high:
            raise ValueError(f"perception_diff range is empty: low={self.low} > high={self.high}")
        return self


class DatasetSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    families: List[str] = Field(default_factory=lambda: [f.value for f in IllusionFamily])
    pairs_per_family: int = Field(200, gt=0)
    positive_weight: float = Field(1.0, gt=0.0)
    negative_weight: float = Field(1.0, gt=0.0)
    strength: StrengthSampling = Field(default_factory=StrengthSampling)
    diff: DiffSampling = Field(default_factory=DiffSampling)
    master_seed: int = Field(0, ge=0, lt=2**64)
    train_fraction: float = Field(0.8, gt=0.0, lt=1.0)
    resolution: Literal[224, 32] = 224

    @field_validator("families")
    @classmethod
    def _families(cls, value: List[str]) -> List[str]:
        if not value:
            raise ValueError("at least one family is required")
        parsed = [IllusionFamily.parse(v) for v in value]
        if len(set(parsed)) != len(parsed):
            raise ValueError(f"duplicate families in {value}")
        order = list(IllusionFamily)
        return [f.value for f in sorted(parsed, key=order.index)]

    @property
    def positive_share(self) -> float:
        return self.positive_weight / (self.positive_weight + self.negative_weight)

    def label_counts(self) -> Dict[int, int]:
        """Per-family sample count for each label; the larger class uses every pair."""
        top = max(self.positive_weight, self.negative_weight)
        positives = math.floor(self.pairs_per_family * self.positive_weight / top + 0.5)
        negatives = math.floor(self.pairs_per_family * self.negative_weight / top + 0.5)
        return {1: positives, 0: negatives}

    @classmethod
    def parse(cls, data: Dict[str, Any]) -> "DatasetSpec":
        try:
            return cls.model_validate(data)
        except ValidationError as exc:
            raise InvalidSpec(f"Invalid dataset spec: {exc.errors()[0]['msg']}") from exc


class MixPlan(BaseModel):
    model_config = ConfigDict(extra="forbid")

    target: List[SampleRecord]
    illusion: List[SampleRecord]
    illusion_fraction: float = Field(0.1, ge=0.0, le=1.0)
    positive_share: float = Field(0.4, ge=0.0, le=1.0)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


class MlpConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    input_dim: Optional[int] = Field(None, ge=1)
    hidden: List[int] = Field(default_factory=lambda: [256])
    base_lr: float = Field(0.001, gt=0.0)
    max_lr: float = Field(0.05, gt=0.0)
    cycle_length: int = Field(400, ge=2)  # iterations per full triangle
    scale_mode: Literal["triangular", "triangular2", "exp_range"] = "triangular"
    gamma: float = Field(1.0, gt=0.0, le=1.0)
    momentum: float = Field(0.9, ge=0.0, lt=1.0)
    batch_size: int = Field(32, ge=1)
    epochs: int = Field(20, ge=0)
    seed: int = Field(0, ge=0, lt=2**64)

    @field_validator("hidden")
    @classmethod
    def _widths(cls, value: List[int]) -> List[int]:
        if any(w < 1 for w in value):
            raise ValueError(f"hidden widths must be >= 1, got {value}")
        return value

    @model_validator(mode="after")
    def _lr_order(self):
        if not self.base_lr < self.max_lr:
            raise ValueError(f"base_lr ({self.base_lr}) must be below max_lr ({self.max_lr})")
        return self

    @property
    def depth(self) -> int:
        return len(self.hidden)


class PreprocSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    luma_weights: List[float] = Field(default_factory=lambda: [0.299, 0.587, 0.114])
    size: int = Field(56, ge=1)

    @field_validator("luma_weights")
    @classmethod
    def _weights(cls, value: List[float]) -> List[float]:
        if len(value) != 3 or any(w < 0 for w in value):
            raise ValueError(f"luma_weights needs three nonnegative weights, got {value}")
        return value

    @property
    def input_dim(self) -> int:
        return self.size * self.size


class FamilyMetrics(BaseModel):
    n: int
    accuracy: float
    recall: Optional[float] = None  # recall of the illusion (label 1) class


class EvalMetrics(BaseModel):
    n_samples: int
    n_target: int = 0
    n_illusion: int = 0
    loss: Optional[float] = None
    top1: Optional[float] = None
    top5: Optional[float] = None
    per_class_recall: Dict[str, float] = Field(default_factory=dict)
    macro_recall: Optional[float] = None
    illusion_accuracy: Optional[float] = None
    illusion_recall: Optional[float] = None
    majority_baseline: Optional[float] = None
    per_family: Dict[str, FamilyMetrics] = Field(default_factory=dict)

    @property
    def headline_recall(self) -> Optional[float]:
        """Recall used for convergence tracking: illusion recall, else macro object recall."""
        return self.illusion_recall if self.illusion_recall is not None else self.macro_recall


class RunMetadata(BaseModel):
    started_at: str
    wall_clock_seconds: float


class TrainRun(BaseModel):
    mode: FusionMode
    n_classes: int
    config: MlpConfig
    preproc: PreprocSpec
    epoch_losses: List[float] = Field(default_factory=list)
    epoch_metrics: List[EvalMetrics] = Field(default_factory=list)
    parameters_digest: str = ""
    metadata: Optional[RunMetadata] = None

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=False)


# ---------------------------------------------------------------------------
# Analysis
# ---------------------------------------------------------------------------


class SeedAggregate(BaseModel):
    n: int
    mean: float
    std: float
    max: float


class FitResult(BaseModel):
    degree: int
    coefficients: List[float]  # ascending powers of raw x
    r_squared: float
    pearson_r: Optional[float] = None
    p_value: Optional[float] = None
    vertex: Optional[float] = None
    n_points: int
    x: List[float]
    y: List[float]
    residuals: List[float]
    x_center: float
    x_scale: float
    residual_variance: float
    gram_inverse: List[List[float]]  # (ZᵀZ)⁻¹ in the centered/scaled basis
    band_x: List[float] = Field(default_factory=list)
    band_lo: List[float] = Field(default_factory=list)
    band_hi: List[float] = Field(default_factory=list)
    level: float = 0.95


class DepthSweepRow(BaseModel):
    task: str
    depth: int
    seed: int
    epochs_to_threshold: Optional[int] = None  # None means "never"
    final_recall: Optional[float] = None
    final_loss: Optional[float] = None


# ---------------------------------------------------------------------------
# Run configuration (TOML)
# ---------------------------------------------------------------------------


class TargetSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["blobs", "folder", "digits"] = "blobs"
    root: Optional[str] = None
    n_classes: int = Field(10, ge=1)
    per_class: int = Field(100, ge=1)
    seed: int = Field(0, ge=0)


class MixSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    target_manifest: Optional[str] = None
    illusion_manifest: Optional[str] = None
    illusion_fraction: float = Field(0.1, ge=0.0, le=1.0)
    positive_share: float = Field(0.4, ge=0.0, le=1.0)
    seed: int = Field(0, ge=0)


class FusionSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: FusionMode = FusionMode.BASE
    illusion_as_target: bool = False


class SweepSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    bins: List[float] = Field(default_factory=lambda: list(STRENGTH_BINS))
    pairs_per_bin: int = Field(40, ge=1)
    diff_bins: int = Field(4, ge=1)
    depths: List[int] = Field(default_factory=lambda: [2, 4, 8])
    width: int = Field(64, ge=1)
    threshold: float = Field(0.9, gt=0.0, lt=1.0)


class FitSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    points: Optional[str] = None
    x: Literal["strength", "perception_diff"] = "strength"
    y: str = "accuracy"
    degree: Literal[1, 2] = 2
    level: float = Field(0.95, gt=0.0, lt=1.0)
    grid_points: int = Field(101, ge=2)
    permutations: Optional[int] = Field(None, ge=1)
    seed: int = Field(0, ge=0)


class RunSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    out: Optional[str] = None
    jobs: Optional[int] = Field(None, ge=1)
    seeds: List[int] = Field(default_factory=lambda: [0])
    manifest: Optional[str] = None
    eval_manifest: Optional[str] = None
    params: Optional[str] = None


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dataset: DatasetSpec = Field(default_factory=DatasetSpec)
    target: TargetSection = Field(default_factory=TargetSection)
    mix: MixSection = Field(default_factory=MixSection)
    model: MlpConfig = Field(default_factory=MlpConfig)
    preproc: PreprocSpec = Field(default_factory=PreprocSpec)
    fusion: FusionSection = Field(default_factory=FusionSection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    fit: FitSection = Field(default_factory=FitSection)
    run: RunSection = Field(default_factory=RunSection)

    @classmethod
    def load(cls, path: Optional[str | Path], overrides: Optional[Dict[str, Dict[str, Any]]] = None) -> "RunConfig":
        """Read a TOML file (or start from defaults) and apply flag overrides per section."""
        data: Dict[str, Any] = {}
        if path is not None:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        for section, values in (overrides or {}).items():
            present = {k: v for k, v in values.items() if v is not None}
            if present:
                merged = dict(data.get(section, {}))
                merged.update(present)
                data[section] = merged
        return cls.model_validate(data)

    def write_resolved(self, out_dir: Path) -> Path:
        out_dir.mkdir(parents=True, exist_ok=True)
        target = out_dir / "resolved_config.json"
        target.write_text(json.dumps(self.model_dump(mode="json"), indent=2) + "\n", encoding="utf-8")
        return target
