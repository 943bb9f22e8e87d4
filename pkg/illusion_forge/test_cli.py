import json
from pathlib import Path

import pandas as pd
import pytest

from cli import build_parser, error_line, main
from dataset import MANIFEST_NAME, read_manifest
from errors import InvalidParams
from models import RunConfig


def test_every_command_is_registered():
    parser = build_parser()
    for command in ("gen", "preview", "mix", "train", "eval", "sweep", "depth", "fit"):
        args = parser.parse_args([command] if command not in ("preview",) else [command, "vh", "0.5", "0.5", "1"])
        assert callable(args.handler)


def test_gen_writes_dataset(tmp_path, capsys):
    out = tmp_path / "gen"
    code = main(["gen", "--families", "muller_lyer", "--pairs", "3", "--resolution", "32", "--seed", "1", "--out", str(out)])
    assert code == 0
    assert "muller_lyer: 3 positive, 3 negative" in capsys.readouterr().out
    records = read_manifest(out / MANIFEST_NAME)
    assert len(records) == 6
    resolved = json.loads((out / "resolved_config.json").read_text(encoding="utf-8"))
    assert resolved["dataset"]["pairs_per_family"] == 3
    assert resolved["dataset"]["resolution"] == 32


def test_gen_rejects_unknown_family(tmp_path, capsys):
    code = main(["gen", "--families", "ponzo", "--pairs", "1", "--out", str(tmp_path / "x")])
    assert code == 1
    assert capsys.readouterr().err.startswith("error: ")


def test_preview_writes_pair(tmp_path, capsys):
    out = tmp_path / "preview"
    assert main(["preview", "zoellner", "0.5", "0.25", "3", "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert printed.startswith("zollner: ")
    assert len(list(out.glob("*.png"))) == 2


def test_preview_out_of_range_strength(tmp_path, capsys):
    code = main(["preview", "vh", "1.5", "0.5", "0", "--out", str(tmp_path / "p")])
    assert code == 1
    err = capsys.readouterr().err
    assert "--strength" in err
    assert not (tmp_path / "p").exists()


def test_fit_on_points_csv(tmp_path, capsys):
    points = tmp_path / "points.csv"
    strengths = [round(0.1 * k, 1) for k in range(1, 10)]
    pd.DataFrame({"strength": strengths, "accuracy": [0.9 - (s - 0.4) ** 2 for s in strengths]}).to_csv(points, index=False)
    out = tmp_path / "fit"
    code = main(["fit", "--points", str(points), "--x", "strength", "--degree", "2", "--permutations", "100", "--out", str(out)])
    assert code == 0
    assert "vertex: 0.4000" in capsys.readouterr().out
    for name in ("fit.json", "plot_data.csv", "fit.svg", "resolved_config.json"):
        assert (out / name).is_file()
    assert json.loads((out / "fit.json").read_text(encoding="utf-8"))["degree"] == 2


def test_fit_requires_points(tmp_path, capsys):
    assert main(["fit", "--out", str(tmp_path / "f")]) == 1
    assert "--points" in capsys.readouterr().err


def test_config_file_and_flags_merge(tmp_path):
    config = tmp_path / "run.toml"
    config.write_text('[dataset]\nfamilies = ["vh"]\npairs_per_family = 2\nresolution = 32\n', encoding="utf-8")
    out = tmp_path / "gen"
    assert main(["gen", "--config", str(config), "--pairs", "3", "--out", str(out)]) == 0
    records = read_manifest(out / MANIFEST_NAME)
    assert {r.family for r in records} == {"vertical_horizontal"}
    assert len(records) == 6


def test_unknown_config_key_is_reported(tmp_path, capsys):
    config = tmp_path / "run.toml"
    config.write_text("[dataset]\npairs = 5\n", encoding="utf-8")
    assert main(["gen", "--config", str(config), "--out", str(tmp_path / "g")]) == 1
    assert "dataset.pairs" in capsys.readouterr().err


def test_error_line_uses_first_line():
    assert error_line(InvalidParams("--diff: bad\ndetails")) == "--diff: bad"


def test_missing_subcommand_exits():
    with pytest.raises(SystemExit):
        main([])


def test_bundled_configs_load():
    configs = sorted((Path(__file__).resolve().parent / "configs").glob("*.toml"))
    assert configs
    for path in configs:
        config = RunConfig.load(path)
        assert config.run.seeds


def test_train_then_eval(tiny_dataset, tmp_path, capsys):
    root, _ = tiny_dataset
    manifest = str(root / MANIFEST_NAME)
    out = tmp_path / "train"
    code = main(
        ["train", "--manifest", manifest, "--mode", "multi", "--epochs", "1", "--hidden", "8",
         "--input-size", "16", "--seeds", "2", "--out", str(out)]
    )
    assert code == 0
    assert "illusion_accuracy: " in capsys.readouterr().out
    for name in ("params_seed0.bin", "params_seed1.bin", "train_run_seed0.json", "aggregate.json"):
        assert (out / name).is_file()

    evaluated = tmp_path / "eval"
    code = main(
        ["eval", "--params", str(out / "params_seed0.bin"), "--manifest", manifest, "--mode", "multi",
         "--input-size", "16", "--out", str(evaluated)]
    )
    assert code == 0
    metrics = json.loads((evaluated / "metrics.json").read_text(encoding="utf-8"))
    assert 0.0 <= metrics["illusion_accuracy"] <= 1.0
    assert (evaluated / "loss_report.json").is_file()


def test_mix_target_and_illusion(tiny_dataset, tmp_path, capsys):
    root, _ = tiny_dataset
    config = tmp_path / "target.toml"
    config.write_text('[target]\nn_classes = 2\nper_class = 5\n\n[dataset]\nresolution = 32\n', encoding="utf-8")
    target = tmp_path / "target"
    assert main(["gen", "--config", str(config), "--target", "blobs", "--out", str(target)]) == 0

    mixed = tmp_path / "mixed"
    code = main(
        ["mix", "--target-manifest", str(target / MANIFEST_NAME), "--illusion-manifest", str(root / MANIFEST_NAME),
         "--fraction", "0.5", "--positive-share", "0.4", "--out", str(mixed)]
    )
    assert code == 0
    records = read_manifest(mixed / MANIFEST_NAME)
    assert {r.source.value for r in records} == {"target", "illusion"}
    assert all((mixed / r.path).is_file() for r in records)


def test_sweep_writes_points_per_bin_and_seed(tmp_path, capsys):
    config = tmp_path / "sweep.toml"
    config.write_text(
        '[dataset]\nfamilies = ["muller_lyer"]\nresolution = 32\n\n[preproc]\nsize = 16\n\n[sweep]\ndiff_bins = 2\n',
        encoding="utf-8",
    )
    out = tmp_path / "sweep"
    code = main(
        ["sweep", "--config", str(config), "--bins", "0.2,0.6", "--pairs", "5", "--epochs", "1", "--hidden", "8",
         "--seeds", "2", "--out", str(out)]
    )
    assert code == 0
    assert "sweep points: " in capsys.readouterr().out
    points = pd.read_csv(out / "sweep_points.csv")
    strength = points[points["axis"] == "strength"]
    assert sorted(strength["x"].unique().tolist()) == [0.2, 0.6]
    assert len(strength) == 4
    assert strength["accuracy"].between(0.0, 1.0).all()
    assert set(points["axis"]) <= {"strength", "perception_diff"}
    resolved = json.loads((out / "resolved_config.json").read_text(encoding="utf-8"))
    assert resolved["sweep"]["bins"] == [0.2, 0.6]


def test_sweep_rejects_bin_outside_unit_interval(tmp_path, capsys):
    assert main(["sweep", "--bins", "0.2,1.4", "--out", str(tmp_path / "s")]) == 1
    assert "--bins" in capsys.readouterr().err


def test_depth_reports_both_tasks(tmp_path, capsys):
    config = tmp_path / "depth.toml"
    config.write_text(
        '[dataset]\nfamilies = ["muller_lyer"]\nresolution = 32\n\n[target]\nper_class = 3\n\n'
        "[preproc]\nsize = 8\n\n[sweep]\nwidth = 4\n",
        encoding="utf-8",
    )
    out = tmp_path / "depth"
    code = main(
        ["depth", "--config", str(config), "--depths", "1,2", "--threshold", "0.5", "--pairs", "5", "--epochs", "1",
         "--seeds", "2", "--out", str(out)]
    )
    assert code == 0
    printed = capsys.readouterr().out
    assert printed.startswith("illusion: epochs to recall 0.5")
    assert "digits: " in printed
    summary = json.loads((out / "depth_summary.json").read_text(encoding="utf-8"))
    assert summary["depths"] == [1, 2]
    for task in ("illusion", "digits"):
        entry = summary["tasks"][task]
        assert set(entry["mean_epochs_by_depth"]) == {"1", "2"}
        assert all(1 <= e <= 2 for e in entry["epochs_to_threshold"])
        assert 0.0 < entry["p_value_positive"] <= 1.0
    assert len(pd.read_csv(out / "depth_sweep.csv")) == 8


def test_depth_rejects_closed_threshold(tmp_path, capsys):
    assert main(["depth", "--threshold", "1", "--out", str(tmp_path / "d")]) == 1
    assert "--threshold" in capsys.readouterr().err


def test_logs_stay_out_of_the_package(tmp_path, isolated_output_dirs):
    assert main(["gen", "--families", "ponzo", "--pairs", "1", "--out", str(tmp_path / "x")]) == 1
    assert (isolated_output_dirs / "app.log").is_file()
    assert (isolated_output_dirs / "failures.log").is_file()
    assert not (Path(__file__).resolve().parent / ".pytest_logs").exists()
