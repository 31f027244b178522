"""Quantization of the ab color plane into a fixed class grid.

The default grid spans [-110, 110] on each axis with 25 bins per axis
(625 classes), wide enough to contain every ab value reachable from
8-bit sRGB. Labels are a-major: label = idx_a * bins + idx_b.
"""

import json
from dataclasses import dataclass, field

import numpy as np

LABEL_LAYOUT = "a_major"


@dataclass(frozen=True)
class QuantizerSpec:
    """Geometry of the ab class grid."""

    ab_min: float = -110.0
    ab_max: float = 110.0
    bins_per_axis: int = 25

    def __post_init__(self):
        if not self.ab_min < self.ab_max:
            raise ValueError("ab_min must be strictly below ab_max")
        if self.bins_per_axis < 1:
            raise ValueError("bins_per_axis must be at least 1")

    @property
    def bin_width(self) -> float:
        return (self.ab_max - self.ab_min) / self.bins_per_axis

    @property
    def num_labels(self) -> int:
        return self.bins_per_axis**2

    def to_dict(self) -> dict:
        return {
            "ab_min": self.ab_min,
            "ab_max": self.ab_max,
            "bins_per_axis": self.bins_per_axis,
            "label_layout": LABEL_LAYOUT,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QuantizerSpec":
        layout = d.get("label_layout", LABEL_LAYOUT)
        if layout != LABEL_LAYOUT:
            raise ValueError(f"unsupported label layout {layout!r}")
        return cls(
            ab_min=float(d["ab_min"]),
            ab_max=float(d["ab_max"]),
            bins_per_axis=int(d["bins_per_axis"]),
        )


def default_epsilon(spec: QuantizerSpec) -> float:
    """Default rebalancing smoothing: 1e-3 of the uniform class frequency."""
    return 1e-3 / spec.num_labels


def _axis_index(values, spec):
    idx = np.floor((np.asarray(values, dtype=np.float64) - spec.ab_min) / spec.bin_width)
    return np.clip(idx, 0, spec.bins_per_axis - 1).astype(np.int64)


def quantize_ab(a: float, b: float, spec: QuantizerSpec) -> int:
    """Map one (a, b) pair to its class label; out-of-grid values clamp."""
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ValueError(f"ab values must be finite, got ({a}, {b})")
    return int(_axis_index(a, spec) * spec.bins_per_axis + _axis_index(b, spec))


def dequantize_label(label: int, spec: QuantizerSpec):
    """Return the bin centroid (a, b) for a class label."""
    label = int(label)
    if not 0 <= label < spec.num_labels:
        raise IndexError(f"label {label} outside [0, {spec.num_labels})")
    idx_a, idx_b = divmod(label, spec.bins_per_axis)
    a = spec.ab_min + (idx_a + 0.5) * spec.bin_width
    b = spec.ab_min + (idx_b + 0.5) * spec.bin_width
    return a, b


def quantize_image(ab, spec: QuantizerSpec):
    """Elementwise quantization of an (H, W, 2) ab map to (H, W) labels."""
    ab = np.asarray(ab)
    if ab.ndim != 3 or ab.shape[-1] != 2:
        raise ValueError(f"expected an (H, W, 2) ab map, got shape {ab.shape}")
    bad = ~np.isfinite(ab)
    if bad.any():
        y, x, _ = np.argwhere(bad)[0]
        raise ValueError(f"non-finite ab value at pixel ({y}, {x})")
    labels = _axis_index(ab[..., 0], spec) * spec.bins_per_axis + _axis_index(
        ab[..., 1], spec
    )
    return labels.astype(np.int32)


def dequantize_labels(labels, spec: QuantizerSpec):
    """Map an (H, W) label map to the (H, W, 2) map of bin centroids."""
    labels = np.asarray(labels)
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= spec.num_labels:
        raise IndexError("label map contains out-of-range labels")
    idx_a, idx_b = np.divmod(labels.astype(np.int64), spec.bins_per_axis)
    ab = np.empty(labels.shape + (2,), dtype=np.float64)
    ab[..., 0] = spec.ab_min + (idx_a + 0.5) * spec.bin_width
    ab[..., 1] = spec.ab_min + (idx_b + 0.5) * spec.bin_width
    return ab


def decode_logits(logits, spec: QuantizerSpec):
    """Per-pixel argmax of (H, W, num_labels) logits, decoded to centroids.

    Ties resolve to the smaller label index.
    """
    logits = np.asarray(logits)
    if logits.ndim != 3 or logits.shape[-1] != spec.num_labels:
        raise ValueError(
            f"expected (H, W, {spec.num_labels}) logits, got shape {logits.shape}"
        )
    if not np.isfinite(logits).all():
        raise ValueError("logits contain non-finite values")
    return dequantize_labels(np.argmax(logits, axis=-1), spec)


@dataclass
class WeightTable:
    """Inverse-frequency class weights for the rebalanced loss."""

    weights: np.ndarray
    epsilon: float
    source_histogram: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.source_histogram = np.asarray(self.source_histogram, dtype=np.int64)


def compute_rebalancing_weights(hist, epsilon: float) -> WeightTable:
    """Build class weights w_c proportional to 1 / (freq_c + epsilon).

    Normalized so that the expectation of w under the empirical class
    frequencies equals 1. With epsilon = 0, classes that never occur get
    weight 0 and are excluded from the normalization.
    """
    hist = np.asarray(hist, dtype=np.float64)
    if hist.ndim != 1 or hist.size == 0:
        raise ValueError("histogram must be a non-empty 1-d array of counts")
    if np.any(hist < 0):
        raise ValueError("histogram counts must be non-negative")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    total = hist.sum()
    if total <= 0:
        raise ValueError("histogram is empty: no observed labels")
    freq = hist / total
    raw = np.zeros_like(freq)
    active = (freq > 0) | (epsilon > 0)
    raw[active] = 1.0 / (freq[active] + epsilon)
    z = float(np.dot(freq, raw))
    return WeightTable(
        weights=raw / z,
        epsilon=float(epsilon),
        source_histogram=hist.astype(np.int64),
    )


def save_quantizer_json(path, spec: QuantizerSpec, table: WeightTable | None = None):
    """Write the grid spec (and optionally the weight vector) as JSON."""
    payload = {"spec": spec.to_dict()}
    if table is not None:
        payload["weights"] = {
            "epsilon": table.epsilon,
            "w": table.weights.tolist(),
            "source_histogram": table.source_histogram.tolist(),
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)


def load_quantizer_json(path):
    """Inverse of save_quantizer_json; returns (spec, table-or-None)."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    spec = QuantizerSpec.from_dict(payload["spec"])
    table = None
    if "weights" in payload:
        w = payload["weights"]
        table = WeightTable(
            weights=np.asarray(w["w"], dtype=np.float64),
            epsilon=float(w["epsilon"]),
            source_histogram=np.asarray(w["source_histogram"], dtype=np.int64),
        )
    return spec, table
