"""Quantitative evaluation: class accuracy, caption-manipulation success,
and activation heatmaps."""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .checkpoint import CheckpointError
from .inference import DEFAULT_HEATMAP_BLOCKS, ModelBundle, predict_ab, predict_logits
from .quantizer import QuantizerSpec
from .text import ColorLexicon, contains_color_word, swap_color_word


def topk_accuracy(logits, targets, k: int, mask=None) -> float:
    """Fraction of pixels whose target class ranks in the top k logits.

    Ties rank the smaller label index first. ``mask`` optionally
    restricts scoring to selected pixels.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    logits = np.asarray(logits)
    if logits.ndim == 3:
        logits = logits[None]
        targets = np.asarray(targets)[None]
        if mask is not None:
            mask = np.asarray(mask)[None]
    b, num_labels, h, w = logits.shape
    x = logits.transpose(0, 2, 3, 1).reshape(-1, num_labels)
    y = np.asarray(targets).reshape(-1)
    if mask is not None:
        keep = np.asarray(mask, dtype=bool).reshape(-1)
        x = x[keep]
        y = y[keep]
    if x.shape[0] == 0:
        raise ValueError("no pixels to score")
    if k >= num_labels:
        return 1.0
    target_logit = x[np.arange(x.shape[0]), y]
    higher = (x > target_logit[:, None]).sum(axis=1)
    tied_before = ((x == target_logit[:, None]) & (np.arange(num_labels) < y[:, None])).sum(axis=1)
    ranks = higher + tied_before
    return float(np.mean(ranks < k))


@dataclass
class EvalReport:
    acc1: float
    acc5: float
    model_id: str
    dataset_id: str
    num_images: int
    region_acc1: float | None = None
    region_acc5: float | None = None
    per_image: list = field(default_factory=list)

    def __post_init__(self):
        if self.acc1 > self.acc5 + 1e-12:
            raise ValueError("acc@1 cannot exceed acc@5")

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "dataset_id": self.dataset_id,
            "num_images": self.num_images,
            "acc1": self.acc1,
            "acc5": self.acc5,
            "region_acc1": self.region_acc1,
            "region_acc5": self.region_acc5,
            "per_image": self.per_image,
        }

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def evaluate(bundle: ModelBundle, samples, quantizer: QuantizerSpec,
             dataset_id: str = "dataset", batch_size: int = 16) -> EvalReport:
    """Aggregate top-1/top-5 accuracy over prepared samples.

    Refuses to score against a label space different from the one the
    checkpoint was trained with. When every sample carries a mask, the
    mask-restricted accuracies are reported as well.
    """
    if quantizer.to_dict() != bundle.quantizer.to_dict():
        raise CheckpointError(
            "quantizer mismatch between the checkpoint and the evaluation dataset"
        )
    if not samples:
        raise ValueError("nothing to evaluate")

    per_image = []
    hits1 = hits5 = total = 0
    region_hits1 = region_hits5 = region_total = 0
    with_masks = all(s.mask is not None for s in samples)

    for start in range(0, len(samples), batch_size):
        chunk = samples[start : start + batch_size]
        lightness = np.stack([s.lightness for s in chunk])
        captions = [s.captions[0] for s in chunk] if bundle.fusion_mode != "none" else None
        logits = predict_logits(bundle, lightness, captions).logits
        for i, sample in enumerate(chunk):
            li = logits[i]
            acc1 = topk_accuracy(li, sample.labels, 1)
            acc5 = topk_accuracy(li, sample.labels, 5)
            pixels = sample.labels.size
            hits1 += acc1 * pixels
            hits5 += acc5 * pixels
            total += pixels
            entry = {"image_id": sample.image_id, "acc1": acc1, "acc5": acc5}
            if with_masks and sample.mask.any():
                r1 = topk_accuracy(li, sample.labels, 1, mask=sample.mask)
                r5 = topk_accuracy(li, sample.labels, 5, mask=sample.mask)
                mask_pixels = int(sample.mask.sum())
                region_hits1 += r1 * mask_pixels
                region_hits5 += r5 * mask_pixels
                region_total += mask_pixels
                entry["region_acc1"] = r1
                entry["region_acc5"] = r5
            per_image.append(entry)

    return EvalReport(
        acc1=hits1 / total,
        acc5=hits5 / total,
        region_acc1=region_hits1 / region_total if region_total else None,
        region_acc5=region_hits5 / region_total if region_total else None,
        model_id=bundle.model_id,
        dataset_id=dataset_id,
        num_images=len(samples),
        per_image=per_image,
    )


@dataclass
class ManipulationRecord:
    image_id: str
    variants: list  # [{"word", "caption", "mean_ab"}]
    success: bool | None
    skipped: bool = False
    mask_pixels: int = 0

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "variants": self.variants,
            "success": self.success,
            "skipped": self.skipped,
            "mask_pixels": self.mask_pixels,
        }


def manipulation_eval(bundle: ModelBundle, sample, base_caption: str, words,
                      lexicon: ColorLexicon | None = None,
                      predict=None) -> ManipulationRecord:
    """Swap color words in the caption and test where the color lands.

    For each target word the caption is rewritten and the image
    recolorized; the record is a success when every variant's mask-mean
    ab is strictly nearest to its own word's canonical ab among all
    tested words. ``predict`` (caption -> ab map at output resolution)
    overrides the model call, mainly for testing the metric itself.
    """
    if bundle.fusion_mode == "none":
        raise ValueError("caption manipulation needs a language-conditioned model")
    lexicon = lexicon or bundle.lexicon
    words = list(dict.fromkeys(words))
    if len(words) < 2:
        raise ValueError("need at least two distinct words to manipulate")
    if sample.mask is None or not sample.mask.any():
        raise ValueError(f"sample {sample.image_id} has no usable object mask")
    if not contains_color_word(base_caption, lexicon):
        return ManipulationRecord(
            image_id=sample.image_id, variants=[], success=None, skipped=True
        )
    if predict is None:
        predict = lambda caption: predict_ab(bundle, sample.lightness, caption)[0]

    canonical = np.stack([lexicon.ab_of(w) for w in words])
    variants = []
    mean_abs = []
    for word in words:
        swapped = swap_color_word(base_caption, word, lexicon).text
        ab = predict(swapped)
        mean_ab = ab[sample.mask].mean(axis=0)
        mean_abs.append(mean_ab)
        variants.append(
            {"word": word, "caption": swapped, "mean_ab": [float(v) for v in mean_ab]}
        )

    success = True
    for i, mean_ab in enumerate(mean_abs):
        dists = np.linalg.norm(canonical - mean_ab[None, :], axis=1)
        nearest = int(np.argmin(dists))
        strictly = dists[i] < np.min(np.delete(dists, i))
        if nearest != i or not strictly:
            success = False
            break

    return ManipulationRecord(
        image_id=sample.image_id,
        variants=variants,
        success=success,
        mask_pixels=int(sample.mask.sum()),
    )


def save_manipulation_records(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict()) + "\n")


def activation_heatmap(feature: np.ndarray) -> np.ndarray:
    """Channel-mean of a (c, h, w) feature map scaled to 8 bits.

    The minimum maps to 0 and the maximum to 255; a constant map yields
    all zeros.
    """
    feature = np.asarray(feature)
    if feature.ndim != 3 or feature.shape[0] < 1:
        raise ValueError(f"expected a (c, h, w) feature map, got shape {feature.shape}")
    mean = feature.mean(axis=0)
    lo = mean.min()
    hi = mean.max()
    if hi == lo:
        return np.zeros(mean.shape, dtype=np.uint8)
    scaled = (mean - lo) / (hi - lo) * 255.0
    return np.rint(scaled).astype(np.uint8)


def save_heatmaps(features: dict, image_id: str, out_dir,
                  blocks=DEFAULT_HEATMAP_BLOCKS) -> list:
    """Write {image_id}_block{n}.png for each captured block."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for n in blocks:
        if n not in features:
            continue
        heat = activation_heatmap(features[n])
        path = out_dir / f"{image_id}_block{n}.png"
        Image.fromarray(heat, mode="L").save(path)
        paths.append(path)
    return paths
