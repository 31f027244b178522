import json

import numpy as np
import pytest
from click.testing import CliRunner

from lang2color import colorspace as cs
from lang2color.cli import main


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """gen-synthetic -> train, shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    runner = CliRunner()
    gen = runner.invoke(
        main,
        [
            "gen-synthetic", "--out", str(root / "data"), "--count", "30",
            "--image-size", "32", "--seed", "3", "--colors", "red,green,blue",
            "--val-fraction", "0.1", "--test-fraction", "0.2",
        ],
    )
    assert gen.exit_code == 0, gen.output
    tr = runner.invoke(
        main,
        [
            "train", "--manifest", str(root / "data" / "manifest.jsonl"),
            "--out", str(root / "run"), "--fusion", "film", "--epochs", "2",
            "--batch-size", "8", "--input-size", "32",
            "--channels", "8,8,8,8,8,8,8,8", "--embed-dim", "8", "--hidden-dim", "8",
        ],
    )
    assert tr.exit_code == 0, tr.output
    return {
        "root": root,
        "manifest": root / "data" / "manifest.jsonl",
        "checkpoint": root / "run" / "last.ckpt",
        "image": root / "data" / "images" / "sample_00000.png",
        "mask": root / "data" / "masks" / "sample_00000.png",
    }


def test_train_writes_artifacts(pipeline):
    assert pipeline["checkpoint"].exists()
    assert (pipeline["root"] / "run" / "history.jsonl").exists()
    assert (pipeline["root"] / "run" / "vocab.json").exists()
    assert (pipeline["root"] / "run" / "quantizer.json").exists()


def test_eval_command(pipeline, runner, tmp_path):
    report_path = tmp_path / "report.json"
    result = runner.invoke(
        main,
        [
            "eval", "--checkpoint", str(pipeline["checkpoint"]),
            "--manifest", str(pipeline["manifest"]), "--split", "test",
            "--out", str(report_path),
        ],
    )
    assert result.exit_code == 0, result.output
    assert "acc@1" in result.output
    report = json.loads(report_path.read_text())
    assert report["acc1"] <= report["acc5"]


def test_colorize_preserves_lightness(pipeline, runner, tmp_path):
    out = tmp_path / "colorized.png"
    result = runner.invoke(
        main,
        [
            "colorize", str(pipeline["image"]), "a red circle on a grey background",
            "--checkpoint", str(pipeline["checkpoint"]), "--out", str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    source_l = cs.rgb_to_lab(cs.load_image(pipeline["image"]))[..., 0]
    result_l = cs.rgb_to_lab(cs.load_image(out))[..., 0]
    # the L channel passes through; only the 8-bit round trip may move it
    assert np.abs(source_l - result_l).max() <= 1.0


def test_colorize_heatmaps(pipeline, runner, tmp_path):
    out = tmp_path / "c.png"
    heat = tmp_path / "heat"
    result = runner.invoke(
        main,
        [
            "colorize", str(pipeline["image"]), "a red circle",
            "--checkpoint", str(pipeline["checkpoint"]), "--out", str(out),
            "--heatmap-dir", str(heat),
        ],
    )
    assert result.exit_code == 0, result.output
    assert sorted(p.name for p in heat.glob("*.png")) == [
        "sample_00000_block6.png",
        "sample_00000_block7.png",
        "sample_00000_block8.png",
    ]


def test_colorize_missing_image_exits_3(pipeline, runner, tmp_path):
    result = runner.invoke(
        main,
        [
            "colorize", str(tmp_path / "missing.png"), "a caption",
            "--checkpoint", str(pipeline["checkpoint"]), "--out", str(tmp_path / "o.png"),
        ],
    )
    assert result.exit_code == 3
    assert not (tmp_path / "o.png").exists()


def test_bad_checkpoint_exits_2(pipeline, runner, tmp_path):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"garbage")
    result = runner.invoke(
        main,
        [
            "colorize", str(pipeline["image"]), "a caption",
            "--checkpoint", str(bad), "--out", str(tmp_path / "o.png"),
        ],
    )
    assert result.exit_code == 2


def test_manipulate_writes_variants(pipeline, runner, tmp_path):
    out = tmp_path / "manip"
    result = runner.invoke(
        main,
        [
            "manipulate", str(pipeline["image"]), "a red circle on a grey background",
            "--checkpoint", str(pipeline["checkpoint"]), "--words", "red,green,blue",
            "--out", str(out), "--mask", str(pipeline["mask"]),
        ],
    )
    assert result.exit_code == 0, result.output
    files = sorted(p.name for p in out.glob("*.png"))
    assert files == ["blue.png", "contact_sheet.png", "green.png", "red.png"]
    record = json.loads((out / "manipulation.json").read_text())
    assert record["success"] in (True, False)
    assert len(record["variants"]) == 3


def test_manipulate_dedupes_words(pipeline, runner, tmp_path):
    result = runner.invoke(
        main,
        [
            "manipulate", str(pipeline["image"]), "a red circle",
            "--checkpoint", str(pipeline["checkpoint"]), "--words", "red,red,green",
            "--out", str(tmp_path / "m"),
        ],
    )
    assert result.exit_code == 0, result.output
    assert "duplicate" in result.output


def test_manipulate_caption_without_color_exits_4(pipeline, runner, tmp_path):
    result = runner.invoke(
        main,
        [
            "manipulate", str(pipeline["image"]), "a circle on a background",
            "--checkpoint", str(pipeline["checkpoint"]), "--words", "red,green",
            "--out", str(tmp_path / "m"),
        ],
    )
    assert result.exit_code == 4


def test_train_warm_start_flag(pipeline, runner, tmp_path):
    result = runner.invoke(
        main,
        [
            "train", "--manifest", str(pipeline["manifest"]),
            "--out", str(tmp_path / "warm"), "--fusion", "concat", "--epochs", "1",
            "--batch-size", "8", "--input-size", "32",
            "--channels", "8,8,8,8,8,8,8,8", "--embed-dim", "8", "--hidden-dim", "8",
            "--warm-start", str(pipeline["checkpoint"]),
        ],
    )
    assert result.exit_code == 0, result.output
    assert "warm start:" in result.output


def test_config_file_supplies_defaults(runner, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"gen-synthetic": {"count": 4, "image_size": 32}}))
    result = runner.invoke(
        main,
        ["--config", str(cfg), "gen-synthetic", "--out", str(tmp_path / "d"), "--seed", "1"],
    )
    assert result.exit_code == 0, result.output
    assert "wrote 4 samples" in result.output


def test_flags_override_config_file(runner, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"gen-synthetic": {"count": 4, "image_size": 32}}))
    result = runner.invoke(
        main,
        [
            "--config", str(cfg), "gen-synthetic", "--out", str(tmp_path / "d2"),
            "--count", "6",
        ],
    )
    assert result.exit_code == 0, result.output
    assert "wrote 6 samples" in result.output
