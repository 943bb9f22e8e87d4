"""Orchestration used by the CLI commands and the verify scripts.

Each service method takes validated configuration, writes its artifacts under
an output directory and returns what it wrote, so commands stay thin.
"""

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from analysis import aggregate_seeds, export_plot_data, plot_frame, polyfit, rank_correlation, with_band
from dataset import (
    MANIFEST_NAME,
    bin_by_perception_diff,
    build,
    family_counts,
    mix,
    read_manifest,
    rebase_records,
    split,
    write_manifest,
)
from errors import EmptyManifest, InvalidParams
from failure_tracker import failure_tracker
from fusion import LabelSpace, batch_loss, encode_label
from illusions import IllusionFamily, IllusionParams, describe_params, generate
from models import (
    DatasetSpec,
    EvalMetrics,
    FitResult,
    FusionMode,
    MixPlan,
    RunConfig,
    SampleRecord,
    Split,
    StrengthSampling,
    TrainRun,
)
from plotting import render_fit_svg, render_montage_svg
from raster import encode_png, montage, rasterize, write_png
from targets import generate_blob_targets, generate_digit_set, load_folder_dataset
from trainer import ArraySet, Mlp, compute_metrics, depth_sweep, evaluate_arrays, fit, infer_n_classes

logger = logging.getLogger(__name__)

SWEEP_POINTS = "sweep_points.csv"


def run_jobs(fn: Callable, items: Sequence, jobs: int) -> List[Any]:
    """Map ``fn`` over ``items`` in order, in a process pool when ``jobs > 1``."""
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def write_json(path: Path, payload: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=False, default=str) + "\n", encoding="utf-8")
    return path


def manifest_root(manifest_path: str | Path) -> Path:
    return Path(manifest_path).resolve().parent


def resolve_mode(mode: FusionMode, records: Sequence[SampleRecord], illusion_as_target: bool) -> Tuple[LabelSpace, bool]:
    """Label space for ``records``; Base on illusion-only data trains a 2-class presence head."""
    if mode == FusionMode.BASE and all(r.is_illusion for r in records):
        illusion_as_target = True
    return LabelSpace(mode, infer_n_classes(records, illusion_as_target)), illusion_as_target


class GenerationService:
    @staticmethod
    def generate_dataset(spec: DatasetSpec, out_dir: Path, jobs: int = 1) -> Tuple[List[SampleRecord], Dict[str, Dict[int, int]]]:
        records = build(spec, out_dir, jobs=jobs)
        counts = family_counts(records)
        logger.info("Dataset generated", extra={"out_dir": str(out_dir), "counts": counts})
        return records, counts

    @staticmethod
    def generate_targets(config: RunConfig, out_dir: Path) -> List[SampleRecord]:
        section = config.target
        fraction = config.dataset.train_fraction
        resolution = config.dataset.resolution
        if section.kind == "blobs":
            return generate_blob_targets(out_dir, section.n_classes, section.per_class, section.seed, fraction, resolution)
        if section.kind == "digits":
            return generate_digit_set(out_dir, section.per_class, section.seed, fraction, resolution)
        if not section.root:
            raise InvalidParams("target.root: a folder-per-class directory is required for kind 'folder'")
        records = load_folder_dataset(section.root)
        parts = split(records, fraction, section.seed)
        records = rebase_records(parts[Split.TRAIN] + parts[Split.TEST], section.root, out_dir)
        write_manifest(records, out_dir / MANIFEST_NAME)
        return records

    @staticmethod
    def preview(params: IllusionParams, out_dir: Path) -> Dict[str, Path]:
        pair = generate(params)
        stem = f"{params.family.value}_s{params.strength:g}_d{params.perception_diff:g}_seed{params.layout_seed}"
        paths = {
            "illusory": out_dir / f"{stem}_illusory.png",
            "control": out_dir / f"{stem}_control.png",
        }
        out_dir.mkdir(parents=True, exist_ok=True)
        write_png(rasterize(pair.illusory), paths["illusory"])
        write_png(rasterize(pair.control), paths["control"])
        logger.info("Preview written", extra={"params": describe_params(params), "files": [str(p) for p in paths.values()]})
        return paths

    @staticmethod
    def preview_montage(strength: float, diff: float, seed: int, out_dir: Path) -> Dict[str, Path]:
        """All five families side by side: illusory row over control row."""
        columns = []
        for family in IllusionFamily:
            pair = generate(IllusionParams(family, strength, diff, seed))
            columns.append((family.value, rasterize(pair.illusory), rasterize(pair.control)))
        grid = montage([c[1] for c in columns] + [c[2] for c in columns], rows=2, cols=len(columns))
        out_dir.mkdir(parents=True, exist_ok=True)
        png_path = out_dir / "montage.png"
        png_path.write_bytes(encode_png(grid))
        svg_path = render_montage_svg(columns, out_dir / "montage.svg")
        return {"png": png_path, "svg": svg_path}


class MixService:
    @staticmethod
    def mix_manifests(
        target_manifest: Path, illusion_manifest: Path, fraction: float, share: float, seed: int, out_dir: Path
    ) -> List[SampleRecord]:
        """Train split of both manifests mixed; test splits are carried over unchanged."""
        target = rebase_records(read_manifest(target_manifest), manifest_root(target_manifest), out_dir)
        illusion = rebase_records(read_manifest(illusion_manifest), manifest_root(illusion_manifest), out_dir)
        if not target and fraction < 1.0:
            raise EmptyManifest(f"{target_manifest} has no records")
        if not illusion and fraction > 0.0:
            raise EmptyManifest(f"{illusion_manifest} has no records")

        plan = MixPlan(
            target=[r for r in target if r.split == Split.TRAIN],
            illusion=[r for r in illusion if r.split == Split.TRAIN],
            illusion_fraction=fraction,
            positive_share=share,
        )
        mixed = mix(plan, seed)
        held_out = [r for r in target + illusion if r.split == Split.TEST]
        records = mixed + held_out
        write_manifest(records, out_dir / MANIFEST_NAME)
        return sorted(records, key=lambda r: r.id)


def _train_job(args) -> Tuple[int, TrainRun, Mlp]:
    model_config, space, train_set, preproc, eval_set, illusion_as_target = args
    try:
        run, model = fit(model_config, space, train_set, preproc, eval_set, illusion_as_target)
    except Exception as exc:
        failure_tracker.track_training_failure(space.mode.value, model_config.seed, exc, model_config.depth)
        raise
    return model_config.seed, run, model


class TrainingService:
    @staticmethod
    def load_sets(config: RunConfig, manifest_path: Path) -> Tuple[LabelSpace, bool, ArraySet, Optional[ArraySet]]:
        records = read_manifest(manifest_path)
        if not records:
            raise EmptyManifest(f"{manifest_path} has no records")
        train_records = [r for r in records if r.split == Split.TRAIN]
        test_records = [r for r in records if r.split == Split.TEST]
        if not train_records:
            raise EmptyManifest(f"{manifest_path} has no train-split records")
        space, as_target = resolve_mode(config.fusion.mode, records, config.fusion.illusion_as_target)
        root = manifest_root(manifest_path)
        train_set = ArraySet.from_records(train_records, root, space, config.preproc, as_target)
        eval_set = ArraySet.from_records(test_records, root, space, config.preproc, as_target) if test_records else None
        return space, as_target, train_set, eval_set

    @staticmethod
    def train_seeds(config: RunConfig, manifest_path: Path, out_dir: Path, jobs: int = 1) -> Dict[str, Any]:
        space, as_target, train_set, eval_set = TrainingService.load_sets(config, manifest_path)
        logger.info(
            "Training",
            extra={"mode": space.mode.value, "n_classes": space.n, "seeds": config.run.seeds, "train": len(train_set)},
        )
        work = [
            (config.model.model_copy(update={"seed": seed}), space, train_set, config.preproc, eval_set, as_target)
            for seed in config.run.seeds
        ]
        results = run_jobs(_train_job, work, jobs)

        top1, illusion_acc = [], []
        for seed, run, model in results:
            write_json(out_dir / f"train_run_seed{seed}.json", run.model_dump(mode="json"))
            model.save(out_dir / f"params_seed{seed}.bin")
            if run.epoch_metrics:
                final = run.epoch_metrics[-1]
                if final.top1 is not None:
                    top1.append(final.top1)
                if final.illusion_accuracy is not None:
                    illusion_acc.append(final.illusion_accuracy)

        summary: Dict[str, Any] = {"mode": space.mode.value, "n_classes": space.n, "head_dims": space.dims}
        if top1:
            summary["top1"] = aggregate_seeds(top1).model_dump()
        if illusion_acc:
            summary["illusion_accuracy"] = aggregate_seeds(illusion_acc).model_dump()
        write_json(out_dir / "aggregate.json", summary)
        return summary

    @staticmethod
    def evaluate_params(config: RunConfig, params_path: Path, manifest_path: Path, out_dir: Path) -> EvalMetrics:
        records = read_manifest(manifest_path)
        eval_records = [r for r in records if r.split == Split.TEST] or records
        if not eval_records:
            raise EmptyManifest(f"{manifest_path} has no records")
        space, as_target = resolve_mode(config.fusion.mode, records, config.fusion.illusion_as_target)
        model = Mlp.load(params_path)
        data = ArraySet.from_records(eval_records, manifest_root(manifest_path), space, config.preproc, as_target)
        metrics = evaluate_arrays(model, space, data.x, data.origins, data.targets, data.families, as_target)

        heads = model.predict(data.x)
        batch = [([h[i] for h in heads], encode_label(space, o)) for i, o in enumerate(data.origins)]
        write_json(out_dir / "metrics.json", metrics.model_dump(mode="json"))
        write_json(out_dir / "loss_report.json", batch_loss(space, batch).to_dict())
        return metrics


def _sweep_job(args) -> List[Dict[str, Any]]:
    strength, seed, model_config, space, train_set, eval_set, preproc, diff_bins = args
    _, _, model = _train_job((model_config.model_copy(update={"seed": seed}), space, train_set, preproc, None, True))
    heads = model.predict(eval_set.x)
    rows = [
        {
            "axis": "strength",
            "x": strength,
            "seed": seed,
            "accuracy": compute_metrics(space, heads, eval_set.origins, eval_set.families, True).illusion_accuracy,
            "n": len(eval_set),
        }
    ]
    for center, members in diff_bins:
        if not members:
            continue
        idx = np.array(members)
        metrics = compute_metrics(
            space, [h[idx] for h in heads], [eval_set.origins[i] for i in idx], [eval_set.families[i] for i in idx], True
        )
        rows.append({"axis": "perception_diff", "x": center, "seed": seed, "accuracy": metrics.illusion_accuracy, "n": int(idx.size)})
    return rows


class StrengthSweepService:
    @staticmethod
    def run(config: RunConfig, out_dir: Path, jobs: int = 1) -> Path:
        """Nine-bin protocol: one dataset per strength bin, one binary run per (bin, seed)."""
        sweep = config.sweep
        work = []
        for index, strength in enumerate(sweep.bins):
            spec = config.dataset.model_copy(
                update={
                    "pairs_per_family": sweep.pairs_per_bin,
                    "strength": StrengthSampling(kind="bins", bins=[strength]),
                    "master_seed": config.dataset.master_seed + index,
                }
            )
            root = out_dir / "bins" / f"s{strength:.2f}"
            records = build(spec, root, jobs=jobs)
            train = [r for r in records if r.split == Split.TRAIN]
            test = [r for r in records if r.split == Split.TEST]
            space = LabelSpace(FusionMode.BASE, 2)
            train_set = ArraySet.from_records(train, root, space, config.preproc, True)
            eval_set = ArraySet.from_records(test, root, space, config.preproc, True)
            position = {r.id: i for i, r in enumerate(test)}
            diff_bins = [
                (center, [position[r.id] for r in members])
                for center, members in bin_by_perception_diff(test, sweep.diff_bins, spec.diff.low, spec.diff.high)
            ]
            for seed in config.run.seeds:
                work.append((strength, seed, config.model, space, train_set, eval_set, config.preproc, diff_bins))
            logger.info(f"Strength bin {strength:.2f}: {len(train)} train / {len(test)} test samples")

        rows = [row for chunk in run_jobs(_sweep_job, work, jobs) for row in chunk]
        frame = pd.DataFrame(rows, columns=["axis", "x", "seed", "accuracy", "n"])
        frame = frame.sort_values(["axis", "x", "seed"], kind="mergesort").reset_index(drop=True)
        path = out_dir / SWEEP_POINTS
        frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        logger.info(f"Wrote {len(frame)} sweep points to {path}")
        return path


class DepthService:
    @staticmethod
    def run(config: RunConfig, out_dir: Path, jobs: int = 1) -> Dict[str, Any]:
        """Depth-delay study on illusion data and on the seven-segment digits control."""
        sweep = config.sweep
        illusion_root = out_dir / "illusion"
        digits_root = out_dir / "digits"
        illusion = build(config.dataset, illusion_root, jobs=jobs)
        digits = generate_digit_set(
            digits_root, config.target.per_class, config.target.seed, config.dataset.train_fraction, config.dataset.resolution
        )

        tasks = {}
        binary = LabelSpace(FusionMode.BASE, 2)
        tasks["illusion"] = (binary, illusion_root, illusion)
        tasks["digits"] = (LabelSpace(FusionMode.BASE, infer_n_classes(digits)), digits_root, digits)

        rows = []
        for task, (space, root, records) in tasks.items():
            train = ArraySet.from_records([r for r in records if r.split == Split.TRAIN], root, space, config.preproc, True)
            test = ArraySet.from_records([r for r in records if r.split == Split.TEST], root, space, config.preproc, True)
            for seed in config.run.seeds:
                rows.extend(
                    depth_sweep(
                        config.model.model_copy(update={"seed": seed}),
                        sweep.depths,
                        space,
                        train,
                        config.preproc,
                        test,
                        threshold=sweep.threshold,
                        width=sweep.width,
                        task=task,
                        illusion_as_target=True,
                        jobs=jobs,
                    )
                )

        frame = pd.DataFrame([r.model_dump() for r in rows])
        frame.to_csv(out_dir / "depth_sweep.csv", index=False, float_format="%.17g", lineterminator="\n")

        summary: Dict[str, Any] = {"threshold": sweep.threshold, "depths": sweep.depths, "tasks": {}}
        never = config.model.epochs + 1
        for task in tasks:
            task_rows = [r for r in rows if r.task == task]
            depths = [r.depth for r in task_rows]
            epochs = [r.epochs_to_threshold if r.epochs_to_threshold is not None else never for r in task_rows]
            entry: Dict[str, Any] = {"epochs_to_threshold": epochs}
            if len(set(depths)) >= 2 and len(task_rows) >= 3:
                rho, p = rank_correlation(depths, epochs, seed=config.fit.seed)
                entry.update({"spearman_rho": rho, "p_value_positive": p})
            mean_epochs = [float(np.mean([e for d, e in zip(depths, epochs) if d == depth])) for depth in sweep.depths]
            entry["mean_epochs_by_depth"] = dict(zip([str(d) for d in sweep.depths], mean_epochs))
            entry["non_decreasing"] = bool(all(a <= b for a, b in zip(mean_epochs, mean_epochs[1:])))
            summary["tasks"][task] = entry
        write_json(out_dir / "depth_summary.json", summary)
        return summary


class AnalysisService:
    @staticmethod
    def load_points(points_path: Path, axis: str, y_column: str = "accuracy") -> Tuple[np.ndarray, np.ndarray]:
        frame = pd.read_csv(points_path)
        if "axis" in frame.columns:
            frame = frame[frame["axis"] == axis]
            x_column = "x"
        else:
            x_column = axis
        if x_column not in frame.columns or y_column not in frame.columns:
            raise InvalidParams(f"--points: {points_path} lacks columns {x_column!r}/{y_column!r}")
        frame = frame.dropna(subset=[x_column, y_column])
        return frame[x_column].to_numpy(dtype=np.float64), frame[y_column].to_numpy(dtype=np.float64)

    @staticmethod
    def fit_points(config: RunConfig, points_path: Path, out_dir: Path) -> FitResult:
        section = config.fit
        x, y = AnalysisService.load_points(points_path, section.x, section.y)
        result = polyfit(x, y, section.degree, n_permutations=section.permutations, seed=section.seed)
        grid = np.linspace(float(x.min()), float(x.max()), section.grid_points)
        result = with_band(result, grid, section.level)

        write_json(out_dir / "fit.json", result.model_dump(mode="json"))
        export_plot_data(plot_frame(x, y, result, section.level), out_dir / "plot_data.csv")
        render_fit_svg(x.tolist(), y.tolist(), result, out_dir / "fit.svg", x_label=section.x, y_label=section.y)
        return result
