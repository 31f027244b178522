"""Fully-convolutional colorization backbone with caption fusion.

Eight conv blocks, each a run of 3x3 convolutions with batch
normalization at the block end, producing per-pixel logits over the
quantized ab classes at 1/stride of the input resolution. Captions can
be fused into every block in one of three modes:

* ``none``   - language-agnostic baseline
* ``concat`` - the caption code is appended as extra channels at every
  spatial position of each block output; the next conv widens its input
* ``film``   - a per-channel affine (1 + gamma) * z + beta whose
  coefficients are linear, bias-free projections of the caption code,
  applied between the block's batch norm and its final ReLU

Tensors are NCHW. Forward and backward passes are explicit; gradient
correctness is checked against finite differences in the tests.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels

FUSION_MODES = ("none", "concat", "film")
NUM_BLOCKS = 8


@dataclass(frozen=True)
class NetworkConfig:
    input_size: int = 224
    block_channels: tuple = (32, 64, 64, 128, 128, 128, 128, 128)
    convs_per_block: tuple = (2, 2, 2, 2, 2, 2, 2, 2)
    block_strides: tuple = (1, 2, 1, 2, 1, 1, 1, 1)
    block_dilations: tuple = (1, 1, 1, 1, 2, 2, 1, 1)
    kernel_size: int = 3
    fusion_mode: str = "none"
    language_dim: int = 256
    num_labels: int = 625

    def __post_init__(self):
        for name in ("block_channels", "convs_per_block", "block_strides", "block_dilations"):
            value = tuple(int(v) for v in getattr(self, name))
            object.__setattr__(self, name, value)
            if len(value) != NUM_BLOCKS:
                raise ValueError(f"{name} must list exactly {NUM_BLOCKS} blocks")
            if any(v < 1 for v in value):
                raise ValueError(f"{name} entries must be positive")
        if self.fusion_mode not in FUSION_MODES:
            raise ValueError(f"fusion_mode must be one of {FUSION_MODES}")
        if self.input_size % self.output_stride != 0:
            raise ValueError(
                f"input_size {self.input_size} not divisible by the "
                f"output stride {self.output_stride}"
            )
        if self.language_dim < 1 or self.num_labels < 1:
            raise ValueError("language_dim and num_labels must be positive")

    @property
    def output_stride(self) -> int:
        stride = 1
        for s in self.block_strides:
            stride *= s
        return stride

    @property
    def output_size(self) -> int:
        return self.input_size // self.output_stride

    @classmethod
    def desk(cls, **overrides) -> "NetworkConfig":
        """Default architecture at 64x64 input."""
        overrides.setdefault("input_size", 64)
        return cls(**overrides)

    def to_dict(self) -> dict:
        return {
            "input_size": self.input_size,
            "block_channels": list(self.block_channels),
            "convs_per_block": list(self.convs_per_block),
            "block_strides": list(self.block_strides),
            "block_dilations": list(self.block_dilations),
            "kernel_size": self.kernel_size,
            "fusion_mode": self.fusion_mode,
            "language_dim": self.language_dim,
            "num_labels": self.num_labels,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        return cls(
            input_size=int(d["input_size"]),
            block_channels=tuple(d["block_channels"]),
            convs_per_block=tuple(d["convs_per_block"]),
            block_strides=tuple(d["block_strides"]),
            block_dilations=tuple(d["block_dilations"]),
            kernel_size=int(d["kernel_size"]),
            fusion_mode=str(d["fusion_mode"]),
            language_dim=int(d["language_dim"]),
            num_labels=int(d["num_labels"]),
        )


def _conv_in_channels(config: NetworkConfig, block: int, conv: int) -> int:
    """Input channels of a conv, accounting for concat-widened inputs."""
    if conv > 1:
        return config.block_channels[block - 1]
    if block == 1:
        return 1
    c_in = config.block_channels[block - 2]
    if config.fusion_mode == "concat":
        c_in += config.language_dim
    return c_in


def _head_in_channels(config: NetworkConfig) -> int:
    c = config.block_channels[-1]
    if config.fusion_mode == "concat":
        c += config.language_dim
    return c


def param_shapes(config: NetworkConfig):
    """Yield (name, shape, trainable) for every network tensor."""
    k = config.kernel_size
    for n in range(1, NUM_BLOCKS + 1):
        c_out = config.block_channels[n - 1]
        for j in range(1, config.convs_per_block[n - 1] + 1):
            c_in = _conv_in_channels(config, n, j)
            yield f"block{n}.conv{j}.w", (c_out, c_in, k, k), True
            yield f"block{n}.conv{j}.b", (c_out,), True
        yield f"block{n}.bn.scale", (c_out,), True
        yield f"block{n}.bn.shift", (c_out,), True
        yield f"block{n}.bn.mean", (c_out,), False
        yield f"block{n}.bn.var", (c_out,), False
        if config.fusion_mode == "film":
            yield f"film{n}.w_gamma", (c_out, config.language_dim), True
            yield f"film{n}.w_beta", (c_out, config.language_dim), True
    yield "head.w", (config.num_labels, _head_in_channels(config), 1, 1), True
    yield "head.b", (config.num_labels,), True


def init_network_params(config: NetworkConfig, rng: np.random.Generator, dtype=np.float32):
    """Fan-in-scaled uniform conv weights; FiLM projections start at zero."""
    params = {}
    for name, shape, _ in param_shapes(config):
        if name.endswith(".w") and "film" not in name:
            fan_in = int(np.prod(shape[1:]))
            bound = 1.0 / np.sqrt(fan_in)
            params[name] = rng.uniform(-bound, bound, size=shape).astype(dtype)
        elif "film" in name:
            params[name] = np.zeros(shape, dtype=dtype)
        elif name.endswith(".scale") or name.endswith(".var"):
            params[name] = np.ones(shape, dtype=dtype)
        else:
            params[name] = np.zeros(shape, dtype=dtype)
    return params


def trainable_names(config: NetworkConfig):
    return [name for name, _, trainable in param_shapes(config) if trainable]


# ---------------------------------------------------------------------------
# layer primitives
# ---------------------------------------------------------------------------


def conv_forward(x, w, b, stride=1, dilation=1):
    n, c_in, h, width = x.shape
    c_out, _, k, _ = w.shape
    pad = dilation * (k - 1) // 2
    out_h = (h + 2 * pad - dilation * (k - 1) - 1) // stride + 1
    out_w = (width + 2 * pad - dilation * (k - 1) - 1) // stride + 1
    if k == 1 and stride == 1:
        cols = x.reshape(n, c_in, h * width)
    else:
        if pad:
            xpad = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        else:
            xpad = x
        cols = kernels.im2col(xpad, k, stride, dilation, out_h, out_w)
    w2 = w.reshape(c_out, -1)
    y = np.matmul(w2, cols).reshape(n, c_out, out_h, out_w)
    y += b[None, :, None, None]
    cache = (cols, (n, c_in, h + 2 * pad, width + 2 * pad), pad, w, stride, dilation, out_h, out_w)
    return y, cache


def conv_backward(dy, cache):
    cols, xpad_shape, pad, w, stride, dilation, out_h, out_w = cache
    n, c_in, hp, wp = xpad_shape
    c_out, _, k, _ = w.shape
    dy2 = dy.reshape(n, c_out, out_h * out_w)
    dw = np.matmul(dy2, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)
    db = dy.sum(axis=(0, 2, 3))
    w2 = w.reshape(c_out, -1)
    dcols = np.matmul(w2.T, dy2)
    if k == 1 and stride == 1:
        return dcols.reshape(n, c_in, out_h, out_w), dw, db
    dxpad = kernels.col2im(
        np.ascontiguousarray(dcols), n, c_in, hp, wp, k, stride, dilation, out_h, out_w
    )
    if pad:
        dx = dxpad[:, :, pad:-pad, pad:-pad]
    else:
        dx = dxpad
    return dx, dw, db


def batchnorm_forward(x, scale, shift, running_mean, running_var, train, momentum=0.1, eps=1e-5):
    """Per-channel normalization; train mode updates running stats in place."""
    if train:
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * var
    else:
        mean = running_mean
        var = running_var
    invstd = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean[None, :, None, None]) * invstd[None, :, None, None]
    y = scale[None, :, None, None] * xhat + shift[None, :, None, None]
    return y, (xhat, invstd, scale, train)


def batchnorm_backward(dy, cache):
    xhat, invstd, scale, train = cache
    dshift = dy.sum(axis=(0, 2, 3))
    dscale = (dy * xhat).sum(axis=(0, 2, 3))
    dxhat = dy * scale[None, :, None, None]
    if train:
        dx = invstd[None, :, None, None] * (
            dxhat
            - dxhat.mean(axis=(0, 2, 3), keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=(0, 2, 3), keepdims=True)
        )
    else:
        dx = dxhat * invstd[None, :, None, None]
    return dx, dscale, dshift


def film_project(h, w_gamma, w_beta):
    """Linear, bias-free projections of the caption code to (gamma, beta)."""
    if w_gamma.shape != w_beta.shape:
        raise ValueError("gamma and beta projections must share a shape")
    if h.shape[-1] != w_gamma.shape[1]:
        raise ValueError(
            f"caption code dim {h.shape[-1]} does not match projection "
            f"input dim {w_gamma.shape[1]}"
        )
    return np.matmul(h, w_gamma.T), np.matmul(h, w_beta.T)


def film_fuse(z, gamma, beta):
    """Apply (1 + gamma) * z + beta per channel, shared across positions."""
    gamma = np.atleast_2d(gamma)
    beta = np.atleast_2d(beta)
    if gamma.shape != beta.shape or gamma.shape[1] != z.shape[1]:
        raise ValueError(
            f"modulation shape {gamma.shape} does not match {z.shape[1]} channels"
        )
    return (1.0 + gamma)[:, :, None, None] * z + beta[:, :, None, None]


def concat_fuse(z, h):
    """Append the caption code as constant channels at every position."""
    n, _, height, width = z.shape
    tiled = np.broadcast_to(h[:, :, None, None], (n, h.shape[1], height, width))
    return np.concatenate([z, tiled.astype(z.dtype, copy=False)], axis=1)


def _relu(x):
    return np.maximum(x, 0.0)


# ---------------------------------------------------------------------------
# full forward / backward
# ---------------------------------------------------------------------------


@dataclass
class ForwardResult:
    logits: np.ndarray
    features: dict = field(default_factory=dict)
    cache: dict | None = None


def forward(params, lightness, h, config: NetworkConfig, train=False,
            capture_blocks=(), want_cache=False):
    """Run the network on a batch of lightness maps.

    ``lightness`` is (B, H, W) with raw L values in [0, 100]; it is
    normalized to [-0.5, 0.5] here. ``h`` is the (B, language_dim)
    caption code, required for the concat and film modes and ignored for
    none. ``capture_blocks`` selects block indices whose post-fusion
    (pre-ReLU) feature maps are returned for heatmap rendering.
    """
    dtype = params["head.b"].dtype
    lightness = np.asarray(lightness)
    if lightness.ndim != 3:
        raise ValueError(f"expected (B, H, W) lightness, got shape {lightness.shape}")
    if lightness.shape[1] != config.input_size or lightness.shape[2] != config.input_size:
        raise ValueError(
            f"lightness resolution {lightness.shape[1:]} does not match "
            f"configured input size {config.input_size}"
        )
    fused = config.fusion_mode != "none"
    if fused:
        if h is None:
            raise ValueError(f"fusion mode {config.fusion_mode!r} requires a caption code")
        h = np.asarray(h, dtype=dtype)
        if h.ndim != 2 or h.shape != (lightness.shape[0], config.language_dim):
            raise ValueError(
                f"caption code must have shape ({lightness.shape[0]}, "
                f"{config.language_dim}), got {h.shape}"
            )

    x = (lightness.astype(dtype) / dtype.type(100.0)) - dtype.type(0.5)
    x = x[:, None, :, :]

    want_cache = want_cache or train
    block_caches = [] if want_cache else None
    features = {}

    for n in range(1, NUM_BLOCKS + 1):
        stride = config.block_strides[n - 1]
        dilation = config.block_dilations[n - 1]
        n_convs = config.convs_per_block[n - 1]
        conv_entries = []
        for j in range(1, n_convs + 1):
            w = params[f"block{n}.conv{j}.w"]
            b = params[f"block{n}.conv{j}.b"]
            x, ccache = conv_forward(x, w, b, stride if j == 1 else 1, dilation)
            mask = None
            if j < n_convs:
                mask = x > 0
                x = _relu(x)
            conv_entries.append((ccache, mask))
        x, bn_cache = batchnorm_forward(
            x,
            params[f"block{n}.bn.scale"],
            params[f"block{n}.bn.shift"],
            params[f"block{n}.bn.mean"],
            params[f"block{n}.bn.var"],
            train,
        )
        film_entry = None
        if config.fusion_mode == "film":
            gamma, beta = film_project(
                h, params[f"film{n}.w_gamma"], params[f"film{n}.w_beta"]
            )
            z_bn = x
            x = film_fuse(z_bn, gamma, beta)
            film_entry = (z_bn, gamma)
        if not np.isfinite(x).all():
            raise FloatingPointError(f"non-finite activations in block {n}")
        if n in capture_blocks:
            features[n] = x.copy()
        pre_relu = x
        x = _relu(x)
        if config.fusion_mode == "concat":
            x = concat_fuse(x, h)
        if want_cache:
            block_caches.append(
                {
                    "convs": conv_entries,
                    "bn": bn_cache,
                    "film": film_entry,
                    "relu_mask": pre_relu > 0,
                }
            )

    logits, head_cache = conv_forward(x, params["head.w"], params["head.b"])
    cache = None
    if want_cache:
        cache = {"blocks": block_caches, "head": head_cache, "h": h}
    return ForwardResult(logits=logits, features=features, cache=cache)


def backward(dlogits, cache, params, config: NetworkConfig):
    """Backpropagate through the network; returns (grads, dh).

    ``grads`` maps trainable network tensor names to gradients; ``dh`` is
    the (B, language_dim) gradient w.r.t. the caption code (None for the
    language-free mode).
    """
    grads = {}
    h = cache["h"]
    fused = config.fusion_mode != "none"
    dh = np.zeros_like(h) if fused else None

    dx, dw, db = conv_backward(dlogits, cache["head"])
    grads["head.w"] = dw
    grads["head.b"] = db

    for n in range(NUM_BLOCKS, 0, -1):
        entry = cache["blocks"][n - 1]
        c_n = config.block_channels[n - 1]
        if config.fusion_mode == "concat":
            dh += dx[:, c_n:].sum(axis=(2, 3))
            dx = np.ascontiguousarray(dx[:, :c_n])
        dx = dx * entry["relu_mask"]
        if config.fusion_mode == "film":
            z_bn, gamma = entry["film"]
            dgamma = (dx * z_bn).sum(axis=(2, 3))
            dbeta = dx.sum(axis=(2, 3))
            grads[f"film{n}.w_gamma"] = dgamma.T @ h
            grads[f"film{n}.w_beta"] = dbeta.T @ h
            dh += dgamma @ params[f"film{n}.w_gamma"] + dbeta @ params[f"film{n}.w_beta"]
            dx = dx * (1.0 + gamma)[:, :, None, None]
        dx, dscale, dshift = batchnorm_backward(dx, entry["bn"])
        grads[f"block{n}.bn.scale"] = dscale
        grads[f"block{n}.bn.shift"] = dshift
        for j in range(config.convs_per_block[n - 1], 0, -1):
            ccache, mask = entry["convs"][j - 1]
            if mask is not None:
                dx = dx * mask
            dx, dw, db = conv_backward(dx, ccache)
            grads[f"block{n}.conv{j}.w"] = dw
            grads[f"block{n}.conv{j}.b"] = db
    return grads, dh


# ---------------------------------------------------------------------------
# parameter accounting and prediction upsampling
# ---------------------------------------------------------------------------


def count_parameters(config: NetworkConfig) -> dict:
    """Exact per-group parameter counts (running BN stats excluded)."""
    counts = {"conv": 0, "batchnorm": 0, "film": 0, "head": 0}
    for name, shape, trainable in param_shapes(config):
        if not trainable:
            continue
        size = int(np.prod(shape))
        if name.startswith("film"):
            counts["film"] += size
        elif name.startswith("head"):
            counts["head"] += size
        elif ".bn." in name:
            counts["batchnorm"] += size
        else:
            counts["conv"] += size
    counts["total"] = sum(counts.values())
    return counts


def film_overhead(language_dim: int, block_channels) -> int:
    """Analytic fusion cost of film: two projections per block."""
    return int(sum(2 * language_dim * c for c in block_channels))


def concat_overhead(language_dim: int, kernel_sizes, out_channels) -> int:
    """Analytic fusion cost of concat: widened inputs of consuming convs."""
    return int(
        sum(k * k * language_dim * c for k, c in zip(kernel_sizes, out_channels, strict=True))
    )


def fusion_overhead(config: NetworkConfig) -> int:
    """Enumerated parameter overhead of the configured fusion mode."""
    base = count_parameters(
        NetworkConfig.from_dict({**config.to_dict(), "fusion_mode": "none"})
    )
    return count_parameters(config)["total"] - base["total"]


def upsample_prediction(ab, target_hw):
    """Bilinearly upsample an (h, w, 2) ab map to the target (H, W)."""
    ab = np.asarray(ab)
    if ab.ndim != 3 or ab.shape[-1] != 2:
        raise ValueError(f"expected an (h, w, 2) ab map, got shape {ab.shape}")
    th, tw = target_hw
    if th < ab.shape[0] or tw < ab.shape[1]:
        raise ValueError("target resolution must be at least the source resolution")
    if (th, tw) == ab.shape[:2]:
        return ab.copy()
    resized = kernels.bilinear_resize(np.ascontiguousarray(ab.transpose(2, 0, 1)), th, tw)
    return resized.transpose(1, 2, 0)
