import pytest

from lang2color import data
from lang2color.encoder import TextConfig
from lang2color.network import NetworkConfig
from lang2color.quantizer import QuantizerSpec
from lang2color.text import build_vocab, default_lexicon
from lang2color.training import TrainConfig, train


def tiny_net_config(fusion="none", **overrides):
    """8-block config small enough for finite differences."""
    kw = dict(
        input_size=8,
        block_channels=(4,) * 8,
        convs_per_block=(1,) * 8,
        block_strides=(1, 2, 1, 2, 1, 1, 1, 1),
        block_dilations=(1,) * 8,
        fusion_mode=fusion,
        language_dim=6,
        num_labels=10,
    )
    kw.update(overrides)
    return NetworkConfig(**kw)


def relative_error(fd, analytic):
    """FD-vs-analytic error with a floor so true-zero gradients compare sanely."""
    return abs(fd - analytic) / max(abs(fd), abs(analytic), 1e-4)


@pytest.fixture(scope="session")
def quantizer_spec():
    return QuantizerSpec()


@pytest.fixture(scope="session")
def lexicon():
    return default_lexicon()


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """A small synthetic dataset shared by integration tests."""
    root = tmp_path_factory.mktemp("tinydata")
    spec = data.SyntheticSpec(
        count=48,
        image_size=32,
        seed=5,
        color_words=("red", "green", "blue"),
        val_fraction=0.125,
        test_fraction=0.25,
    )
    manifest = data.generate_synthetic(spec, root)
    return {"root": root, "manifest": manifest, "spec": spec}


@pytest.fixture(scope="session")
def tiny_trained(tiny_dataset, tmp_path_factory):
    """A briefly trained small FiLM model for service/CLI style tests."""
    records = data.load_manifest(tiny_dataset["manifest"])
    quant = QuantizerSpec()
    net = NetworkConfig(
        input_size=32,
        block_channels=(8, 16, 16, 16, 16, 16, 16, 16),
        convs_per_block=(1,) * 8,
        fusion_mode="film",
        language_dim=32,
    )
    train_recs = [r for r in records if r.split == "train"]
    vocab = build_vocab([c for r in train_recs for c in r.captions])
    text_cfg = TextConfig(vocab_size=len(vocab), embed_dim=16, hidden_dim=16)
    samples, _ = data.prepare_dataset(train_recs, quant, 32, net.output_stride, vocab)
    out = tmp_path_factory.mktemp("tinyckpt")
    result = train(
        samples,
        [],
        vocab=vocab,
        lexicon=default_lexicon(),
        quantizer=quant,
        net_config=net,
        text_config=text_cfg,
        cfg=TrainConfig(epochs=2, batch_size=8, seed=1, checkpoint_dir=str(out)),
    )
    return {
        "checkpoint": result.checkpoint_path,
        "params": result.params,
        "net": net,
        "vocab": vocab,
        "samples": samples,
        "dataset": tiny_dataset,
    }
