import hashlib

import pytest

from dataset import (
    MANIFEST_NAME,
    bin_by_perception_diff,
    bin_by_strength,
    build,
    family_counts,
    manifest_frame,
    mix,
    pair_key,
    read_manifest,
    rebase_records,
    sample_id,
    split,
    stable_id,
    write_manifest,
)
from errors import DatasetIOError, InsufficientSamples, InvalidFraction, InvalidSpec, UnbinnableSample
from geometry import ElementRole
from illusions import IllusionParams, generate
from models import DatasetSpec, MixPlan, SampleRecord, SampleSource, Split
from raster import read_png


def _illusion(index, label, family="zollner", strength=0.5, diff=0.5, key=None):
    key = pair_key(0, family, index) if key is None else key
    return SampleRecord(
        id=sample_id(key, label),
        path=f"{family}/{label}/{index}.png",
        source=SampleSource.ILLUSION,
        family=family,
        label=label,
        strength=strength,
        perception_diff=diff,
    )


def _target(index, k):
    return SampleRecord(
        id=stable_id(f"target/{index}"),
        path=f"class_{k:03d}/{index:05d}.png",
        source=SampleSource.TARGET,
        family="target",
        label=k,
    )


def _tree_digest(root):
    h = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        h.update(path.relative_to(root).as_posix().encode())
        h.update(path.read_bytes())
    return h.hexdigest()


def test_build_counts_and_layout(tiny_dataset):
    root, records = tiny_dataset
    assert family_counts(records) == {"muller_lyer": {0: 4, 1: 4}, "zollner": {0: 4, 1: 4}}
    for r in records:
        assert r.path == f"{r.family}/{r.label}/{r.id}.png"
        assert (root / r.path).is_file()
        assert read_png(root / r.path).width == 32
    assert read_manifest(root / MANIFEST_NAME) == records


def test_build_pairs_share_metadata(tiny_dataset):
    _, records = tiny_dataset
    by_id = {r.id: r for r in records}
    for r in records:
        mate = by_id[r.mate_id]
        assert mate.label == 1 - r.label
        assert (mate.family, mate.strength, mate.perception_diff, mate.split) == (r.family, r.strength, r.perception_diff, r.split)


def test_pair_mates_differ_only_in_context():
    params = IllusionParams("poggendorff", 0.3, 0.6, 12)
    pair = generate(params)
    assert pair.illusory.by_role(ElementRole.REFERENCE, ElementRole.TARGET) == pair.control.segments


def test_build_is_byte_identical_across_runs_and_workers(tmp_path, tiny_spec):
    build(tiny_spec, tmp_path / "a")
    build(tiny_spec, tmp_path / "b", jobs=2)
    assert _tree_digest(tmp_path / "a") == _tree_digest(tmp_path / "b")


def test_unbalanced_ratio_uses_weights(tmp_path):
    spec = DatasetSpec(families=["vh"], pairs_per_family=5, positive_weight=2, negative_weight=3, resolution=32)
    assert spec.label_counts() == {1: 3, 0: 5}
    assert spec.positive_share == pytest.approx(0.4)


def test_full_scale_counts_are_spec_arithmetic():
    spec = DatasetSpec(pairs_per_family=12000)
    counts = spec.label_counts()
    assert counts[1] * len(spec.families) == 60000
    assert counts[0] * len(spec.families) == 60000


def test_invalid_spec_rejected():
    with pytest.raises(InvalidSpec):
        DatasetSpec.parse({"pairs_per_family": 0})
    with pytest.raises(InvalidSpec):
        DatasetSpec.parse({"train_fraction": 1.0})
    with pytest.raises(InvalidSpec):
        DatasetSpec.parse({"unknown_key": 1})


def test_families_are_normalized_and_ordered():
    spec = DatasetSpec(families=["zoellner", "hering"])
    assert spec.families == ["hering_wundt", "zollner"]


def test_manifest_keys_and_order(tmp_path):
    records = [_illusion(i, label) for i in range(3) for label in (0, 1)]
    path = write_manifest(reversed(records), tmp_path / MANIFEST_NAME)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith('{"id":')
    assert list(manifest_frame(read_manifest(path)).columns) == [
        "id",
        "path",
        "source",
        "family",
        "label",
        "strength",
        "perception_diff",
        "split",
    ]
    assert [r.id for r in read_manifest(path)] == sorted(r.id for r in records)


def test_malformed_manifest_row(tmp_path):
    path = tmp_path / MANIFEST_NAME
    path.write_text('{"id": 1, "path": "x.png"}\n', encoding="utf-8")
    with pytest.raises(DatasetIOError):
        read_manifest(path)


def test_split_balanced_and_stratified():
    records = [_illusion(i, label, family) for family in ("zollner", "poggendorff") for i in range(250) for label in (0, 1)]
    parts = split(records, 0.8, seed=3)
    assert len(parts[Split.TRAIN]) == 800 and len(parts[Split.TEST]) == 200
    for name in ("zollner", "poggendorff"):
        for label in (0, 1):
            assert sum(1 for r in parts[Split.TRAIN] if (r.family, r.label) == (name, label)) == 200
    train_ids = {r.id for r in parts[Split.TRAIN]}
    test_ids = {r.id for r in parts[Split.TEST]}
    assert not train_ids & test_ids
    assert train_ids | test_ids == {r.id for r in records}
    assert all(r.split == Split.TRAIN for r in parts[Split.TRAIN])


def test_split_keeps_pairs_together():
    records = [_illusion(i, label) for i in range(40) for label in (0, 1)]
    parts = split(records, 0.7, seed=1)
    train_ids = {r.id for r in parts[Split.TRAIN]}
    for r in parts[Split.TRAIN]:
        assert r.mate_id in train_ids


@pytest.mark.parametrize("seed", range(12))
def test_split_keeps_pairs_together_with_unequal_label_counts(seed):
    # positive_weight=1, negative_weight=2: half the pairs have no illusory member
    records = [_illusion(i, 0) for i in range(40)] + [_illusion(i, 1) for i in range(20)]
    parts = split(records, 0.5, seed=seed)
    side = {r.id: r.split for members in parts.values() for r in members}
    for r in records:
        if r.mate_id in side:
            assert side[r.id] == side[r.mate_id]
    train = parts[Split.TRAIN]
    assert sum(1 for r in train if r.label == 1) == 10
    assert sum(1 for r in train if r.label == 0) == 20


def test_build_unbalanced_spec_keeps_pairs_together(tmp_path):
    spec = DatasetSpec(families=["vh"], pairs_per_family=6, positive_weight=1, negative_weight=2, resolution=32)
    records = build(spec, tmp_path / "data")
    by_id = {r.id: r for r in records}
    assert family_counts(records) == {"vertical_horizontal": {0: 6, 1: 3}}
    for r in records:
        if r.label == 1:
            assert by_id[r.mate_id].split == r.split


def test_split_is_deterministic():
    records = [_illusion(i, label) for i in range(30) for label in (0, 1)]
    assert split(records, 0.5, 9) == split(records, 0.5, 9)


def test_split_rejects_degenerate_fraction():
    records = [_illusion(i, 1) for i in range(10)]
    with pytest.raises(InvalidFraction):
        split(records, 0.999, 0)
    with pytest.raises(InvalidFraction):
        split(records, 1.0, 0)


def test_bin_by_strength_partition():
    bins = [round(0.1 * k, 1) for k in range(1, 10)]
    records = [_illusion(i, i % 2, strength=bins[i % 9]) for i in range(90)]
    partition = bin_by_strength(records, bins)
    assert [len(v) for v in partition.values()] == [10] * 9
    ids = [r.id for members in partition.values() for r in members]
    assert sorted(ids) == sorted(r.id for r in records)


def test_bin_by_strength_single_bin_and_errors():
    records = [_illusion(i, 1, strength=0.5) for i in range(5)]
    assert bin_by_strength(records, [0.5]) == {0.5: records}
    with pytest.raises(UnbinnableSample):
        bin_by_strength([_illusion(0, 1, strength=0.55)], [0.5, 0.6])
    with pytest.raises(UnbinnableSample):
        bin_by_strength([_target(0, 0)], [0.5])


def test_bin_by_perception_diff():
    records = [_illusion(i, 1, diff=d) for i, d in enumerate([0.1, 0.3, 0.5, 0.7, 0.9])]
    groups = bin_by_perception_diff(records, 4, 0.1, 0.9)
    assert [round(c, 6) for c, _ in groups] == [0.2, 0.4, 0.6, 0.8]
    assert sum(len(m) for _, m in groups) == 5
    assert groups[-1][1][-1].perception_diff == 0.9


def _pool(n_pairs):
    return [_illusion(i, label) for i in range(n_pairs) for label in (0, 1)]


def test_mix_quota_from_target_size():
    target = [_target(i, i % 10) for i in range(9000)]
    plan = MixPlan(target=target, illusion=_pool(1000), illusion_fraction=0.1, positive_share=0.4)
    mixed = mix(plan, seed=0)
    illusion = [r for r in mixed if r.is_illusion]
    assert len(illusion) == 1000
    assert sum(r.label for r in illusion) == 400
    assert len(mixed) == 10000


def test_mix_zero_fraction_returns_target():
    target = [_target(i, i % 3) for i in range(30)]
    plan = MixPlan(target=target, illusion=_pool(10), illusion_fraction=0.0)
    assert mix(plan, 5) == sorted(target, key=lambda r: r.id)


def test_mix_half_and_half():
    target = [_target(i, 0) for i in range(100)]
    plan = MixPlan(target=target, illusion=_pool(200), illusion_fraction=0.5, positive_share=0.5)
    mixed = mix(plan, 1)
    illusion = [r for r in mixed if r.is_illusion]
    assert len(illusion) == 100
    assert sum(r.label for r in illusion) == 50
    assert len({r.id for r in illusion}) == 100


def test_mix_is_deterministic_and_resamples_with_seed():
    target = [_target(i, 0) for i in range(300)]
    plan = MixPlan(target=target, illusion=_pool(200), illusion_fraction=0.1, positive_share=0.4)
    assert mix(plan, 4) == mix(plan, 4)
    assert mix(plan, 4) != mix(plan, 5)


def test_mix_insufficient_samples():
    target = [_target(i, 0) for i in range(900)]
    plan = MixPlan(target=target, illusion=_pool(20), illusion_fraction=0.1, positive_share=0.4)
    with pytest.raises(InsufficientSamples):
        mix(plan, 0)


def test_mix_illusion_only():
    plan = MixPlan(target=[], illusion=_pool(50), illusion_fraction=1.0, positive_share=0.4)
    mixed = mix(plan, 0)
    assert all(r.is_illusion for r in mixed)
    assert sum(r.label for r in mixed) == round(0.4 * len(mixed))


def test_rebase_records(tmp_path):
    record = _illusion(0, 1)
    rebased = rebase_records([record], tmp_path / "data", tmp_path / "mixed")
    assert rebased[0].path == f"../data/{record.path}"


def test_failed_render_is_tracked_with_master_seed(tmp_path, tiny_spec, monkeypatch):
    import dataset

    tracked = []

    def broken(job):
        raise RuntimeError("render failed")

    monkeypatch.setattr(dataset, "render_pair", broken)
    monkeypatch.setattr(
        dataset.failure_tracker,
        "track_generation_failure",
        lambda family, index, exc, master_seed=None: tracked.append((family, index, master_seed)),
    )
    with pytest.raises(RuntimeError):
        build(tiny_spec, tmp_path / "data")
    assert tracked == [("muller_lyer", 0, 7)]
