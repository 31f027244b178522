from types import SimpleNamespace

import numpy as np
import pytest

from lang2color import evaluation as ev
from lang2color.checkpoint import CheckpointError
from lang2color.data import PreparedSample
from lang2color.text import default_lexicon


# ---------------------------------------------------------------------------
# top-k accuracy
# ---------------------------------------------------------------------------


def test_topk_perfect_predictions():
    rng = np.random.default_rng(0)
    targets = rng.integers(0, 10, (2, 3, 3))
    logits = rng.normal(size=(2, 10, 3, 3))
    idx = np.indices(targets.shape)
    logits[idx[0], targets, idx[1], idx[2]] = 100.0
    assert ev.topk_accuracy(logits, targets, 1) == 1.0


def test_topk_counts_argmax_pixel():
    logits = np.array([0.1, 0.5, 0.2, 0.2]).reshape(1, 4, 1, 1)
    targets = np.array([[[1]]])
    assert ev.topk_accuracy(logits, targets, 1) == 1.0
    assert ev.topk_accuracy(logits, np.array([[[0]]]), 1) == 0.0


def test_topk_full_cover():
    rng = np.random.default_rng(1)
    logits = rng.normal(size=(1, 625, 4, 4))
    targets = rng.integers(0, 625, (1, 4, 4))
    assert ev.topk_accuracy(logits, targets, 625) == 1.0


def test_topk_tie_break_prefers_smaller_label():
    logits = np.zeros((1, 4, 1, 1))  # four-way tie
    assert ev.topk_accuracy(logits, np.array([[[0]]]), 1) == 1.0
    assert ev.topk_accuracy(logits, np.array([[[1]]]), 1) == 0.0
    assert ev.topk_accuracy(logits, np.array([[[1]]]), 2) == 1.0


def test_topk_monotone_transform_invariance():
    rng = np.random.default_rng(2)
    logits = rng.normal(size=(2, 8, 4, 4))
    targets = rng.integers(0, 8, (2, 4, 4))
    for k in (1, 3, 5):
        base = ev.topk_accuracy(logits, targets, k)
        assert ev.topk_accuracy(3.0 * logits + 7.0, targets, k) == base
        assert ev.topk_accuracy(np.exp(logits), targets, k) == base


def test_topk_acc1_never_exceeds_acc5():
    rng = np.random.default_rng(3)
    for _ in range(10):
        logits = rng.normal(size=(1, 20, 5, 5))
        targets = rng.integers(0, 20, (1, 5, 5))
        assert ev.topk_accuracy(logits, targets, 1) <= ev.topk_accuracy(logits, targets, 5)


def test_topk_chance_level():
    """Random logits vs random targets sit at k/num_labels within 3 sigma."""
    rng = np.random.default_rng(4)
    n_pixels = 40 * 40 * 8
    logits = rng.normal(size=(8, 625, 40, 40))
    targets = rng.integers(0, 625, (8, 40, 40))
    for k in (1, 5):
        p = k / 625
        sigma = np.sqrt(p * (1 - p) / n_pixels)
        acc = ev.topk_accuracy(logits, targets, k)
        assert abs(acc - p) < 3 * sigma


def test_topk_mask_restriction():
    logits = np.zeros((1, 3, 2, 2))
    logits[0, 1] = 1.0  # predicts class 1 everywhere
    targets = np.array([[[1, 0], [0, 0]]])
    mask = np.array([[[True, False], [False, False]]])
    assert ev.topk_accuracy(logits, targets, 1, mask=mask) == 1.0
    assert ev.topk_accuracy(logits, targets, 1) == 0.25


def test_topk_rejects_bad_k_and_empty_mask():
    logits = np.zeros((1, 3, 2, 2))
    targets = np.zeros((1, 2, 2), dtype=int)
    with pytest.raises(ValueError):
        ev.topk_accuracy(logits, targets, 0)
    with pytest.raises(ValueError):
        ev.topk_accuracy(logits, targets, 1, mask=np.zeros((1, 2, 2), dtype=bool))


# ---------------------------------------------------------------------------
# report plumbing
# ---------------------------------------------------------------------------


def test_eval_report_invariant():
    with pytest.raises(ValueError):
        ev.EvalReport(acc1=0.9, acc5=0.5, model_id="m", dataset_id="d", num_images=1)


def test_eval_report_save(tmp_path):
    report = ev.EvalReport(acc1=0.4, acc5=0.7, model_id="m", dataset_id="d", num_images=3)
    path = tmp_path / "report.json"
    report.save(path)
    import json

    loaded = json.loads(path.read_text())
    assert loaded["acc1"] == 0.4 and loaded["num_images"] == 3


def test_evaluate_refuses_quantizer_mismatch(tiny_trained):
    from lang2color.inference import ModelBundle
    from lang2color.quantizer import QuantizerSpec

    bundle = ModelBundle.load(tiny_trained["checkpoint"])
    other = QuantizerSpec(ab_min=-100, ab_max=100)
    with pytest.raises(CheckpointError):
        ev.evaluate(bundle, tiny_trained["samples"], other)


def test_evaluate_reports_region_metrics(tiny_trained):
    from lang2color.inference import ModelBundle
    from lang2color.quantizer import QuantizerSpec

    bundle = ModelBundle.load(tiny_trained["checkpoint"])
    report = ev.evaluate(bundle, tiny_trained["samples"], QuantizerSpec())
    assert 0.0 <= report.acc1 <= report.acc5 <= 1.0
    assert report.region_acc1 is not None
    assert len(report.per_image) == len(tiny_trained["samples"])


# ---------------------------------------------------------------------------
# caption manipulation metric
# ---------------------------------------------------------------------------


def _fake_sample():
    mask = np.zeros((4, 4), dtype=bool)
    mask[1:3, 1:3] = True
    return PreparedSample(
        image_id="fake",
        lightness=np.full((16, 16), 60.0, dtype=np.float32),
        labels=np.zeros((4, 4), dtype=np.int32),
        captions=["a red circle"],
        mask=mask,
    )


def _fused_stub():
    return SimpleNamespace(fusion_mode="film", lexicon=default_lexicon())


def test_manipulation_perfect_model_succeeds():
    lexicon = default_lexicon()
    sample = _fake_sample()

    def perfect(caption):
        word = caption.split()[1]
        ab = np.zeros((4, 4, 2))
        ab[sample.mask] = lexicon.ab_of(word)
        return ab

    record = ev.manipulation_eval(
        _fused_stub(), sample, "a red circle", ["red", "green", "blue"], predict=perfect
    )
    assert record.success is True
    assert len(record.variants) == 3
    assert record.mask_pixels == 4


def test_manipulation_constant_model_fails():
    lexicon = default_lexicon()
    sample = _fake_sample()
    constant_ab = np.tile(lexicon.ab_of("red"), (4, 4, 1))
    record = ev.manipulation_eval(
        _fused_stub(), sample, "a red circle", ["red", "green"],
        predict=lambda caption: constant_ab,
    )
    assert record.success is False


def test_manipulation_success_invariant_to_word_order():
    lexicon = default_lexicon()
    sample = _fake_sample()

    def perfect(caption):
        word = caption.split()[1]
        ab = np.zeros((4, 4, 2))
        ab[sample.mask] = lexicon.ab_of(word)
        return ab

    for words in (["red", "green", "blue"], ["blue", "red", "green"]):
        record = ev.manipulation_eval(
            _fused_stub(), sample, "a red circle", words, predict=perfect
        )
        assert record.success is True


def test_manipulation_skips_caption_without_color_word():
    record = ev.manipulation_eval(
        _fused_stub(), _fake_sample(), "a circle on a background", ["red", "green"],
        predict=lambda caption: np.zeros((4, 4, 2)),
    )
    assert record.skipped and record.success is None


def test_manipulation_rejects_language_free_model():
    stub = SimpleNamespace(fusion_mode="none", lexicon=default_lexicon())
    with pytest.raises(ValueError):
        ev.manipulation_eval(stub, _fake_sample(), "a red circle", ["red", "green"])


def test_manipulation_dedupes_and_requires_two_words():
    with pytest.raises(ValueError):
        ev.manipulation_eval(
            _fused_stub(), _fake_sample(), "a red circle", ["red", "red"],
            predict=lambda c: np.zeros((4, 4, 2)),
        )


def test_manipulation_records_jsonl(tmp_path):
    lexicon = default_lexicon()
    sample = _fake_sample()
    record = ev.manipulation_eval(
        _fused_stub(), sample, "a red circle", ["red", "green"],
        predict=lambda c: np.tile(lexicon.ab_of("red"), (4, 4, 1)),
    )
    path = tmp_path / "records.jsonl"
    ev.save_manipulation_records(path, [record])
    import json

    row = json.loads(path.read_text().splitlines()[0])
    assert row["image_id"] == "fake" and row["success"] is False


# ---------------------------------------------------------------------------
# activation heatmaps
# ---------------------------------------------------------------------------


def test_heatmap_hand_computed():
    feature = np.array([[[0.0, 2.0], [4.0, 8.0]]])
    heat = ev.activation_heatmap(feature)
    assert heat.dtype == np.uint8
    assert heat.tolist() == [[0, 64], [128, 255]]


def test_heatmap_constant_map_is_zero():
    heat = ev.activation_heatmap(np.full((3, 4, 4), 2.5))
    assert heat.dtype == np.uint8
    assert np.all(heat == 0)


def test_heatmap_single_channel_scales_map():
    feature = np.array([[[1.0, 3.0], [2.0, 5.0]]])
    heat = ev.activation_heatmap(feature)
    expected = np.rint((feature[0] - 1.0) / 4.0 * 255.0).astype(np.uint8)
    assert np.array_equal(heat, expected)


def test_heatmap_attains_endpoints():
    rng = np.random.default_rng(5)
    for _ in range(5):
        feature = rng.normal(size=(6, 5, 7))
        heat = ev.activation_heatmap(feature)
        assert heat.min() == 0 and heat.max() == 255


def test_heatmap_mean_over_channels():
    rng = np.random.default_rng(6)
    feature = rng.normal(size=(4, 3, 3))
    heat = ev.activation_heatmap(feature)
    mean = feature.mean(axis=0)
    assert heat.flatten()[np.argmin(mean)] == 0
    assert heat.flatten()[np.argmax(mean)] == 255


def test_save_heatmaps_filenames(tmp_path):
    rng = np.random.default_rng(7)
    features = {6: rng.normal(size=(4, 2, 2)), 8: rng.normal(size=(4, 2, 2))}
    paths = ev.save_heatmaps(features, "img42", tmp_path, blocks=(6, 7, 8))
    names = sorted(p.name for p in paths)
    assert names == ["img42_block6.png", "img42_block8.png"]
