"""Loading trained models and running the colorization pipeline."""

from dataclasses import dataclass

import numpy as np

from . import colorspace
from .checkpoint import CheckpointError, load_checkpoint
from .data import resize_rgb
from .encoder import TextConfig, encode_batch
from .kernels import bilinear_resize
from .network import NetworkConfig, forward
from .quantizer import QuantizerSpec, decode_logits
from .text import ColorLexicon, Vocab, tokenize

DEFAULT_HEATMAP_BLOCKS = (6, 7, 8)


@dataclass
class ModelBundle:
    """Everything needed to run a trained model."""

    params: dict
    net_config: NetworkConfig
    text_config: TextConfig | None
    quantizer: QuantizerSpec
    vocab: Vocab
    lexicon: ColorLexicon
    model_id: str
    metadata: dict

    @property
    def fusion_mode(self) -> str:
        return self.net_config.fusion_mode

    @classmethod
    def load(cls, path) -> "ModelBundle":
        params, meta = load_checkpoint(path)
        try:
            net_config = NetworkConfig.from_dict(meta["network"])
            text_config = TextConfig.from_dict(meta["text"]) if meta.get("text") else None
            quantizer = QuantizerSpec.from_dict(meta["quantizer"])
            vocab = Vocab.from_dict(meta["vocab"])
            lexicon = ColorLexicon.from_dict(meta["lexicon"])
            model_id = str(meta.get("model_id", "unknown"))
        except (KeyError, ValueError) as exc:
            raise CheckpointError(f"checkpoint metadata is incomplete: {exc}") from exc
        return cls(
            params=params,
            net_config=net_config,
            text_config=text_config,
            quantizer=quantizer,
            vocab=vocab,
            lexicon=lexicon,
            model_id=model_id,
            metadata=meta,
        )


def caption_codes(bundle: ModelBundle, captions) -> np.ndarray | None:
    """Encode captions for a fused model; None in language-free mode."""
    if bundle.fusion_mode == "none":
        return None
    ids = [tokenize(c, bundle.vocab).ids for c in captions]
    h, _ = encode_batch(ids, bundle.params)
    return h


def predict_logits(bundle: ModelBundle, lightness, captions=None, capture_blocks=()):
    """Eval-mode forward over (B, H, W) raw lightness maps."""
    h = None
    if bundle.fusion_mode != "none":
        if captions is None:
            raise ValueError(f"fusion mode {bundle.fusion_mode!r} needs captions")
        h = caption_codes(bundle, captions)
    return forward(
        bundle.params,
        lightness,
        h,
        bundle.net_config,
        train=False,
        capture_blocks=capture_blocks,
    )


def predict_ab(bundle: ModelBundle, lightness, caption: str | None, capture_blocks=()):
    """One image -> (ab map at output resolution, captured features)."""
    captions = [caption] if caption is not None else None
    result = predict_logits(bundle, lightness[None], captions, capture_blocks)
    logits_hwk = result.logits[0].transpose(1, 2, 0)
    ab = decode_logits(logits_hwk, bundle.quantizer)
    features = {n: feat[0] for n, feat in result.features.items()}
    return ab, features


def resize_prediction(ab: np.ndarray, target_hw) -> np.ndarray:
    """Bilinearly resize an (h, w, 2) ab map to any target resolution.

    Unlike the upsampling operation this also handles originals smaller
    than the network's output resolution (a 1x1 request is legal).
    """
    th, tw = target_hw
    if (th, tw) == ab.shape[:2]:
        return ab.copy()
    resized = bilinear_resize(np.ascontiguousarray(ab.transpose(2, 0, 1)), th, tw)
    return resized.transpose(1, 2, 0)


def network_lightness(rgb: np.ndarray, input_size: int) -> np.ndarray:
    resized = resize_rgb(rgb, input_size)
    lab = colorspace.rgb_to_lab(resized)
    return lab[..., 0].astype(np.float32)


def colorize_rgb(bundle: ModelBundle, rgb: np.ndarray, caption: str,
                 return_heatmaps=False, blocks=DEFAULT_HEATMAP_BLOCKS):
    """Colorize an image from its greyscale channel and a caption.

    Color inputs are accepted; their ab content is discarded. The
    predicted ab field is upsampled to the original resolution and merged
    with the original lightness channel. Returns (rgb_out, heatmaps)
    where heatmaps maps block index to an 8-bit array (empty dict unless
    requested).
    """
    from .evaluation import activation_heatmap

    rgb = np.asarray(rgb, dtype=np.uint8)
    lab_full = colorspace.rgb_to_lab(rgb)
    lightness_net = network_lightness(rgb, bundle.net_config.input_size)
    capture = tuple(blocks) if return_heatmaps else ()
    ab_small, features = predict_ab(bundle, lightness_net, caption, capture)
    ab_full = resize_prediction(ab_small, rgb.shape[:2])
    ab_full = colorspace.fit_ab_to_gamut(lab_full[..., 0], ab_full)
    out = colorspace.lab_to_rgb(
        colorspace.merge_lab(lab_full[..., 0], ab_full)
    )
    heatmaps = {}
    if return_heatmaps:
        heatmaps = {n: activation_heatmap(feat) for n, feat in features.items()}
    return out, heatmaps
