"""Dataset plumbing: manifests, synthetic shape data, preprocessing.

The synthetic generator is the verification substrate for caption
conditioning: every image is a single colored shape on a neutral grey
background, with the shape drawn at a fixed lightness regardless of its
color word. The greyscale channel is therefore (up to 8-bit rounding)
identical across color variants, so only the caption can tell the model
which color to paint.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import colorspace
from .kernels import bilinear_resize
from .quantizer import QuantizerSpec, quantize_image
from .text import ColorLexicon, contains_color_word, default_lexicon, tokenize

SHAPE_KINDS = ("circle", "square", "triangle")


class DataError(Exception):
    """Manifest or image ingestion failure."""


@dataclass
class ManifestRecord:
    image_path: str
    captions: list[str]
    split: str = "train"
    mask_path: str | None = None
    image_id: str | None = None

    def __post_init__(self):
        if not self.captions:
            raise DataError("manifest record must carry at least one caption")
        if self.image_id is None:
            self.image_id = Path(self.image_path).stem


def load_manifest(path) -> list[ManifestRecord]:
    """Read a JSONL manifest and verify that referenced files exist."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"manifest {path} does not exist")
    base = path.parent
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON ({exc})") from exc
            try:
                record = ManifestRecord(
                    image_path=str(base / raw["image_path"]),
                    captions=list(raw["captions"]),
                    split=raw.get("split", "train"),
                    mask_path=str(base / raw["mask_path"]) if raw.get("mask_path") else None,
                    image_id=raw.get("image_id"),
                )
            except (KeyError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: bad record ({exc})") from exc
            for p in (record.image_path, record.mask_path):
                if p and not Path(p).exists():
                    raise DataError(f"record {len(records)}: missing file {p}")
            records.append(record)
    return records


def save_manifest(path, records, base: Path):
    """Write records as JSONL with paths relative to the manifest."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            row = {
                "image_id": rec.image_id,
                "image_path": str(Path(rec.image_path).relative_to(base)),
                "captions": rec.captions,
                "split": rec.split,
            }
            if rec.mask_path:
                row["mask_path"] = str(Path(rec.mask_path).relative_to(base))
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def filter_color_captions(records, lexicon: ColorLexicon) -> list[ManifestRecord]:
    """Keep records with at least one color-word caption; drop the rest.

    Within a kept record, captions without a whole-word lexicon match are
    removed. Idempotent.
    """
    kept = []
    for rec in records:
        captions = [c for c in rec.captions if contains_color_word(c, lexicon)]
        if captions:
            kept.append(
                ManifestRecord(
                    image_path=rec.image_path,
                    captions=captions,
                    split=rec.split,
                    mask_path=rec.mask_path,
                    image_id=rec.image_id,
                )
            )
    return kept


# ---------------------------------------------------------------------------
# synthetic colored-shapes generator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    count: int = 100
    image_size: int = 64
    shapes: tuple = SHAPE_KINDS
    color_words: tuple = ("red", "green", "blue", "orange")
    seed: int = 0
    background_lightness: float = 75.0
    shape_lightness: float = 60.0
    val_fraction: float = 0.0
    test_fraction: float = 0.0

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be positive")
        if self.image_size < 8:
            raise ValueError("image_size must be at least 8")
        if len(self.color_words) < 2:
            raise ValueError("need at least 2 color words, otherwise language carries no signal")
        unknown = set(self.shapes) - set(SHAPE_KINDS)
        if unknown:
            raise ValueError(f"unknown shapes {sorted(unknown)}")
        if not 0 <= self.val_fraction + self.test_fraction < 1:
            raise ValueError("val/test fractions must leave room for a train split")

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "image_size": self.image_size,
            "shapes": list(self.shapes),
            "color_words": list(self.color_words),
            "seed": self.seed,
            "background_lightness": self.background_lightness,
            "shape_lightness": self.shape_lightness,
            "val_fraction": self.val_fraction,
            "test_fraction": self.test_fraction,
        }


def _shape_mask(kind: str, size: int, cx: float, cy: float, half: float) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    if kind == "circle":
        return (xx - cx) ** 2 + (yy - cy) ** 2 <= half**2
    if kind == "square":
        return (np.abs(xx - cx) <= half) & (np.abs(yy - cy) <= half)
    if kind == "triangle":
        # upward triangle: apex at (cx, cy - half), base at cy + half
        inside_y = (yy >= cy - half) & (yy <= cy + half)
        width = (yy - (cy - half)) / 2.0
        return inside_y & (np.abs(xx - cx) <= width)
    raise ValueError(f"unknown shape kind {kind!r}")


def render_sample(spec: SyntheticSpec, lexicon: ColorLexicon, shape: str,
                  color_word: str, cx: float, cy: float, half: float):
    """Render one Lab scene and rasterize it to sRGB plus a mask.

    Raises if the render leaves sRGB gamut: the canonical colors are
    chosen to be displayable at the fixed shape lightness, so a clip here
    means the lexicon and generator drifted apart.
    """
    size = spec.image_size
    mask = _shape_mask(shape, size, cx, cy, half)
    lab = np.zeros((size, size, 3))
    lab[..., 0] = spec.background_lightness
    a, b = lexicon.ab_of(color_word)
    lab[mask, 0] = spec.shape_lightness
    lab[mask, 1] = a
    lab[mask, 2] = b
    rgb, clipped = colorspace.lab_to_rgb(lab, return_clip_count=True)
    if clipped:
        raise ValueError(
            f"{color_word} at L*={spec.shape_lightness} left sRGB gamut ({clipped} px)"
        )
    return rgb, mask


def generate_synthetic(spec: SyntheticSpec, out_dir) -> Path:
    """Write images, masks and a manifest; returns the manifest path.

    Deterministic under the configured seed; rerunning produces byte-identical
    files.
    """
    out_dir = Path(out_dir)
    images = out_dir / "images"
    masks = out_dir / "masks"
    images.mkdir(parents=True, exist_ok=True)
    masks.mkdir(parents=True, exist_ok=True)
    lexicon = default_lexicon()

    rng = np.random.default_rng(spec.seed)
    size = spec.image_size
    n_test = int(round(spec.count * spec.test_fraction))
    n_val = int(round(spec.count * spec.val_fraction))

    records = []
    for i in range(spec.count):
        shape = spec.shapes[rng.integers(len(spec.shapes))]
        word = spec.color_words[rng.integers(len(spec.color_words))]
        half = rng.uniform(size * 0.14, size * 0.32)
        cx = rng.uniform(half + 1, size - half - 2)
        cy = rng.uniform(half + 1, size - half - 2)
        rgb, mask = render_sample(spec, lexicon, shape, word, cx, cy, half)

        image_id = f"sample_{i:05d}"
        image_path = images / f"{image_id}.png"
        mask_path = masks / f"{image_id}.png"
        colorspace.save_image(image_path, rgb)
        colorspace.save_mask(mask_path, mask)
        if i < spec.count - n_val - n_test:
            split = "train"
        elif i < spec.count - n_test:
            split = "val"
        else:
            split = "test"
        records.append(
            ManifestRecord(
                image_path=str(image_path),
                captions=[f"a {word} {shape} on a grey background"],
                split=split,
                mask_path=str(mask_path),
                image_id=image_id,
            )
        )

    manifest_path = out_dir / "manifest.jsonl"
    save_manifest(manifest_path, records, out_dir)
    with open(out_dir / "spec.json", "w", encoding="utf-8") as fh:
        json.dump(spec.to_dict(), fh, indent=2, sort_keys=True)
    return manifest_path


# ---------------------------------------------------------------------------
# preprocessing into training triples
# ---------------------------------------------------------------------------


@dataclass
class PreparedSample:
    image_id: str
    lightness: np.ndarray  # (input, input) float32, raw L in [0, 100]
    labels: np.ndarray  # (out, out) int32 class indices
    captions: list[str]
    caption_ids: list[np.ndarray] = field(default_factory=list)
    mask: np.ndarray | None = None  # (out, out) bool, when a mask file exists
    split: str = "train"


def area_downsample(channel_map: np.ndarray, factor: int) -> np.ndarray:
    """Average non-overlapping factor x factor blocks; shape must divide."""
    h, w = channel_map.shape[:2]
    if h % factor or w % factor:
        raise ValueError(f"resolution {h}x{w} not divisible by {factor}")
    blocked = (h // factor, factor, w // factor, factor) + channel_map.shape[2:]
    return channel_map.reshape(blocked).mean(axis=(1, 3))


def resize_rgb(rgb: np.ndarray, size: int) -> np.ndarray:
    if rgb.shape[0] == size and rgb.shape[1] == size:
        return rgb
    resized = bilinear_resize(
        np.ascontiguousarray(rgb.transpose(2, 0, 1).astype(np.float64)), size, size
    )
    return np.rint(resized.transpose(1, 2, 0)).clip(0, 255).astype(np.uint8)


def preprocess(record: ManifestRecord, quantizer: QuantizerSpec, input_size: int,
               output_stride: int) -> PreparedSample:
    """Image file -> (lightness at input res, labels at output res, captions).

    The ab channels are area-averaged down to the output resolution
    before quantization; the mask, when present, is downsampled by
    majority coverage.
    """
    try:
        rgb = colorspace.load_image(record.image_path)
    except Exception as exc:
        raise DataError(f"cannot decode {record.image_path}: {exc}") from exc
    rgb = resize_rgb(rgb, input_size)
    lab = colorspace.rgb_to_lab(rgb)
    lightness, ab = colorspace.split_lab(lab)
    ab_small = area_downsample(ab, output_stride)
    labels = quantize_image(ab_small, quantizer)

    mask = None
    if record.mask_path:
        raw_mask = colorspace.load_mask(record.mask_path).astype(np.float64)
        if raw_mask.shape != (input_size, input_size):
            raw_mask = bilinear_resize(
                np.ascontiguousarray(raw_mask[None]), input_size, input_size
            )[0]
        mask = area_downsample(raw_mask, output_stride) >= 0.5

    return PreparedSample(
        image_id=record.image_id,
        lightness=lightness.astype(np.float32),
        labels=labels,
        captions=list(record.captions),
        mask=mask,
        split=record.split,
    )


def prepare_dataset(records, quantizer: QuantizerSpec, input_size: int,
                    output_stride: int, vocab=None, log=None):
    """Preprocess records, skipping undecodable ones with a report."""
    samples = []
    skipped = []
    for idx, record in enumerate(records):
        try:
            sample = preprocess(record, quantizer, input_size, output_stride)
        except DataError as exc:
            skipped.append((idx, str(exc)))
            if log:
                log(f"skipping record {idx}: {exc}")
            continue
        if vocab is not None:
            sample.caption_ids = [tokenize(c, vocab).ids for c in sample.captions]
        samples.append(sample)
    return samples, skipped
