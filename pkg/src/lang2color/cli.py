"""Command line entry points.

Exit codes: 0 success, 2 checkpoint problem, 3 input problem, 4 caption
problem. All options can also be supplied through a JSON config file
(``lang2color --config cfg.json <command>``); explicit flags override
file values.
"""

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import colorspace, data
from .checkpoint import CheckpointError
from .encoder import TextConfig
from .evaluation import (
    evaluate,
    manipulation_eval,
    save_heatmaps,
    save_manipulation_records,
)
from .inference import ModelBundle, colorize_rgb
from .network import NetworkConfig
from .quantizer import QuantizerSpec, save_quantizer_json
from .text import build_vocab, contains_color_word, default_lexicon, swap_color_word
from .training import TrainConfig, train

EXIT_CHECKPOINT = 2
EXIT_INPUT = 3
EXIT_CAPTION = 4


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_bundle(checkpoint: str) -> ModelBundle:
    if not checkpoint:
        _fail(
            EXIT_CHECKPOINT,
            "no checkpoint given (use --checkpoint or LANG2COLOR_CHECKPOINT)",
        )
    try:
        return ModelBundle.load(checkpoint)
    except CheckpointError as exc:
        _fail(EXIT_CHECKPOINT, str(exc))


def _load_image(path: str) -> np.ndarray:
    try:
        return colorspace.load_image(path)
    except Exception as exc:
        _fail(EXIT_INPUT, f"cannot read image {path}: {exc}")


def _comma_list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


checkpoint_option = click.option(
    "--checkpoint",
    envvar="LANG2COLOR_CHECKPOINT",
    default=None,
    help="Checkpoint path (or set LANG2COLOR_CHECKPOINT).",
)


@click.group()
@click.option(
    "--config",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="JSON file with per-command default option values.",
)
@click.pass_context
def main(ctx, config):
    """Caption-conditioned colorization toolkit."""
    if config:
        with open(config, encoding="utf-8") as fh:
            ctx.default_map = json.load(fh)


@main.command("gen-synthetic")
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--count", default=100, show_default=True)
@click.option("--image-size", default=64, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--colors", default="red,green,blue,orange", show_default=True)
@click.option("--shapes", default="circle,square,triangle", show_default=True)
@click.option("--val-fraction", default=0.0, show_default=True)
@click.option("--test-fraction", default=0.0, show_default=True)
def gen_synthetic(out, count, image_size, seed, colors, shapes, val_fraction, test_fraction):
    """Generate the lightness-matched colored-shapes dataset."""
    try:
        spec = data.SyntheticSpec(
            count=count,
            image_size=image_size,
            seed=seed,
            color_words=tuple(_comma_list(colors)),
            shapes=tuple(_comma_list(shapes)),
            val_fraction=val_fraction,
            test_fraction=test_fraction,
        )
        manifest = data.generate_synthetic(spec, out)
    except (ValueError, OSError) as exc:
        _fail(EXIT_INPUT, str(exc))
    click.echo(f"wrote {count} samples; manifest at {manifest}")


@main.command("train")
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--fusion", type=click.Choice(["none", "concat", "film"]), default="film",
              show_default=True)
@click.option("--epochs", default=10, show_default=True)
@click.option("--batch-size", default=16, show_default=True)
@click.option("--lr", default=1e-3, show_default=True)
@click.option("--lr-schedule", type=click.Choice(["cosine", "constant"]), default="cosine",
              show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--epsilon", default=None, type=float,
              help="Rebalancing smoothing (default: 1e-3 of uniform frequency).")
@click.option("--eval-every", default=1, show_default=True)
@click.option("--input-size", default=64, show_default=True)
@click.option("--channels", default="16,32,32,64,64,64,64,64", show_default=True,
              help="Comma list of the 8 block widths.")
@click.option("--convs-per-block", default="1,1,1,1,1,1,1,1", show_default=True)
@click.option("--embed-dim", default=32, show_default=True)
@click.option("--hidden-dim", default=32, show_default=True)
@click.option("--min-freq", default=1, show_default=True)
@click.option("--warm-start", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Initialize backbone conv/batch-norm tensors from this checkpoint "
                   "(typically a language-free run).")
def train_cmd(manifest, out, fusion, epochs, batch_size, lr, lr_schedule, seed, epsilon,
              eval_every, input_size, channels, convs_per_block, embed_dim, hidden_dim,
              min_freq, warm_start):
    """Train a colorization model on a manifest dataset."""
    try:
        records = data.load_manifest(manifest)
    except data.DataError as exc:
        _fail(EXIT_INPUT, str(exc))

    quantizer = QuantizerSpec()
    text_config = TextConfig(vocab_size=2, embed_dim=embed_dim, hidden_dim=hidden_dim)
    try:
        net_config = NetworkConfig(
            input_size=input_size,
            block_channels=tuple(int(c) for c in _comma_list(channels)),
            convs_per_block=tuple(int(c) for c in _comma_list(convs_per_block)),
            fusion_mode=fusion,
            language_dim=text_config.language_dim,
        )
    except ValueError as exc:
        _fail(EXIT_INPUT, str(exc))

    train_records = [r for r in records if r.split == "train"]
    val_records = [r for r in records if r.split == "val"]
    if not train_records:
        _fail(EXIT_INPUT, "manifest has no train-split records")

    vocab = build_vocab(
        [c for r in train_records for c in r.captions], min_freq=min_freq
    )
    text_config = TextConfig(
        vocab_size=len(vocab), embed_dim=embed_dim, hidden_dim=hidden_dim
    )
    lexicon = default_lexicon()

    click.echo(f"preparing {len(train_records)} train / {len(val_records)} val records")
    train_samples, skipped = data.prepare_dataset(
        train_records, quantizer, input_size, net_config.output_stride, vocab,
        log=lambda m: click.echo(m, err=True),
    )
    val_samples, _ = data.prepare_dataset(
        val_records, quantizer, input_size, net_config.output_stride, vocab
    )
    if skipped:
        click.echo(f"skipped {len(skipped)} records", err=True)

    warm_params = None
    if warm_start:
        from .checkpoint import check_quantizer_match, load_checkpoint

        try:
            warm_params, warm_meta = load_checkpoint(warm_start)
            check_quantizer_match(warm_meta, quantizer.to_dict())
        except CheckpointError as exc:
            _fail(EXIT_CHECKPOINT, str(exc))

    cfg = TrainConfig(
        epochs=epochs,
        batch_size=batch_size,
        learning_rate=lr,
        lr_schedule=lr_schedule,
        seed=seed,
        epsilon=epsilon,
        eval_every=eval_every,
        checkpoint_dir=out,
    )
    result = train(
        train_samples,
        val_samples,
        vocab=vocab,
        lexicon=lexicon,
        quantizer=quantizer,
        net_config=net_config,
        text_config=text_config if fusion != "none" else None,
        cfg=cfg,
        warm_start=warm_params,
        log=click.echo,
    )
    vocab.save(Path(out) / "vocab.json")
    save_quantizer_json(Path(out) / "quantizer.json", quantizer, result.weight_table)
    if result.aborted:
        click.echo("training aborted on a numeric error; last checkpoint retained", err=True)
        sys.exit(1)
    click.echo(f"checkpoint: {result.checkpoint_path}")


@main.command("eval")
@checkpoint_option
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--split", default="test", show_default=True)
@click.option("--out", default=None, type=click.Path(dir_okay=False),
              help="Write the report JSON here.")
@click.option("--color-filter/--no-color-filter", default=True, show_default=True,
              help="Restrict to captions containing a lexicon color word.")
def eval_cmd(checkpoint, manifest, split, out, color_filter):
    """Report top-1/top-5 accuracy in the quantized ab space."""
    bundle = _load_bundle(checkpoint)
    try:
        records = [r for r in data.load_manifest(manifest) if r.split == split]
    except data.DataError as exc:
        _fail(EXIT_INPUT, str(exc))
    if color_filter:
        records = data.filter_color_captions(records, bundle.lexicon)
    if not records:
        _fail(EXIT_INPUT, f"no records in split {split!r} after filtering")
    samples, _ = data.prepare_dataset(
        records, bundle.quantizer, bundle.net_config.input_size,
        bundle.net_config.output_stride, bundle.vocab,
    )
    try:
        report = evaluate(bundle, samples, bundle.quantizer, dataset_id=str(manifest))
    except CheckpointError as exc:
        _fail(EXIT_CHECKPOINT, str(exc))
    click.echo(f"acc@1 {report.acc1:.4f}  acc@5 {report.acc5:.4f}  ({report.num_images} images)")
    if report.region_acc1 is not None:
        click.echo(f"region acc@1 {report.region_acc1:.4f}  region acc@5 {report.region_acc5:.4f}")
    if out:
        report.save(out)
        click.echo(f"report written to {out}")


@main.command("colorize")
@click.argument("image_path", type=click.Path(dir_okay=False))
@click.argument("caption")
@checkpoint_option
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--heatmap-dir", default=None, type=click.Path(file_okay=False),
              help="Also write block activation heatmaps here.")
def colorize_cmd(image_path, caption, checkpoint, out, heatmap_dir):
    """Colorize one image conditioned on a caption."""
    bundle = _load_bundle(checkpoint)
    rgb = _load_image(image_path)
    result, heatmaps = colorize_rgb(
        bundle, rgb, caption, return_heatmaps=heatmap_dir is not None
    )
    colorspace.save_image(out, result)
    if heatmap_dir:
        from PIL import Image

        Path(heatmap_dir).mkdir(parents=True, exist_ok=True)
        for n, heat in heatmaps.items():
            Image.fromarray(heat, mode="L").save(
                Path(heatmap_dir) / f"{Path(image_path).stem}_block{n}.png"
            )
    click.echo(f"wrote {out}")


@main.command("manipulate")
@click.argument("image_path", type=click.Path(dir_okay=False))
@click.argument("base_caption")
@checkpoint_option
@click.option("--words", default="red,green,blue", show_default=True)
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--mask", default=None, type=click.Path(dir_okay=False),
              help="Object mask PNG; enables the manipulation success record.")
def manipulate_cmd(image_path, base_caption, checkpoint, words, out, mask):
    """Recolorize an image once per color word swapped into the caption."""
    bundle = _load_bundle(checkpoint)
    if bundle.fusion_mode == "none":
        _fail(EXIT_CHECKPOINT, "this checkpoint is language-agnostic; nothing to manipulate")
    word_list = _comma_list(words)
    deduped = list(dict.fromkeys(word_list))
    if len(deduped) < len(word_list):
        click.echo("warning: duplicate words removed", err=True)
    if len(deduped) < 2:
        _fail(EXIT_INPUT, "need at least two distinct color words")
    unknown = [w for w in deduped if w not in bundle.lexicon]
    if unknown:
        _fail(EXIT_INPUT, f"words not in the lexicon: {unknown}")
    if not contains_color_word(base_caption, bundle.lexicon):
        _fail(EXIT_CAPTION, "base caption contains no lexicon color word to swap")

    rgb = _load_image(image_path)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)

    panels = []
    for word in deduped:
        caption = swap_color_word(base_caption, word, bundle.lexicon).text
        result, _ = colorize_rgb(bundle, rgb, caption)
        colorspace.save_image(out_dir / f"{word}.png", result)
        panels.append(result)
    gap = 4
    h, w = panels[0].shape[:2]
    sheet = np.full((h, len(panels) * w + gap * (len(panels) - 1), 3), 255, dtype=np.uint8)
    for i, panel in enumerate(panels):
        x0 = i * (w + gap)
        sheet[:, x0 : x0 + w] = panel
    colorspace.save_image(out_dir / "contact_sheet.png", sheet)

    if mask:
        record_source = data.ManifestRecord(
            image_path=image_path, captions=[base_caption], mask_path=mask
        )
        try:
            sample = data.preprocess(
                record_source, bundle.quantizer, bundle.net_config.input_size,
                bundle.net_config.output_stride,
            )
        except data.DataError as exc:
            _fail(EXIT_INPUT, str(exc))
        record = manipulation_eval(bundle, sample, base_caption, deduped)
        with open(out_dir / "manipulation.json", "w", encoding="utf-8") as fh:
            json.dump(record.to_dict(), fh, indent=2)
        click.echo(f"manipulation success: {record.success}")
    click.echo(f"wrote {len(deduped)} variants + contact sheet to {out_dir}")


@main.command("serve")
@checkpoint_option
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--studio-dir", default=None, type=click.Path(file_okay=False),
              help="Serve the built web studio from this directory at /studio.")
def serve_cmd(checkpoint, host, port, studio_dir):
    """Run the HTTP colorization service."""
    import uvicorn

    from .service import create_app

    bundle = _load_bundle(checkpoint)
    app = create_app(bundle, studio_dir=studio_dir)
    click.echo(f"serving {bundle.model_id} ({bundle.fusion_mode}) on {host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
