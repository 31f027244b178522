"""Caption encoder: embedding + bi-directional LSTM, trained jointly.

The caption code is the concatenation of the forward direction's hidden
state after the last token and the backward direction's hidden state
after the first token. Forward and backward passes are written out
explicitly; the gradients are verified against finite differences in
the test suite.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TextConfig:
    vocab_size: int
    embed_dim: int = 64
    hidden_dim: int = 128

    def __post_init__(self):
        if self.vocab_size < 2 or self.embed_dim < 1 or self.hidden_dim < 1:
            raise ValueError("text config dimensions must be positive")

    @property
    def language_dim(self) -> int:
        return 2 * self.hidden_dim

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "embed_dim": self.embed_dim,
            "hidden_dim": self.hidden_dim,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TextConfig":
        return cls(
            vocab_size=int(d["vocab_size"]),
            embed_dim=int(d["embed_dim"]),
            hidden_dim=int(d["hidden_dim"]),
        )


def init_text_params(config: TextConfig, rng: np.random.Generator, dtype=np.float32):
    """Embedding plus one LSTM parameter set per direction."""
    e, h = config.embed_dim, config.hidden_dim
    params = {
        "text.embed": rng.uniform(-0.1, 0.1, size=(config.vocab_size, e)).astype(dtype)
    }
    bound = 1.0 / np.sqrt(h)
    for direction in ("fwd", "bwd"):
        params[f"text.{direction}.w_x"] = rng.uniform(
            -bound, bound, size=(4 * h, e)
        ).astype(dtype)
        params[f"text.{direction}.w_h"] = rng.uniform(
            -bound, bound, size=(4 * h, h)
        ).astype(dtype)
        params[f"text.{direction}.b"] = np.zeros(4 * h, dtype=dtype)
    return params


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _run_direction(xs, w_x, w_h, b):
    """Run one LSTM direction over (T, E) inputs; returns last h and caches."""
    hdim = w_h.shape[1]
    h = np.zeros(hdim, dtype=xs.dtype)
    c = np.zeros(hdim, dtype=xs.dtype)
    steps = []
    for t in range(xs.shape[0]):
        x = xs[t]
        z = w_x @ x + w_h @ h + b
        i = _sigmoid(z[:hdim])
        f = _sigmoid(z[hdim : 2 * hdim])
        g = np.tanh(z[2 * hdim : 3 * hdim])
        o = _sigmoid(z[3 * hdim :])
        c_new = f * c + i * g
        tanh_c = np.tanh(c_new)
        steps.append((x, h, c, i, f, g, o, tanh_c))
        h = o * tanh_c
        c = c_new
    return h, steps


def _direction_backward(dh_last, steps, w_x, w_h):
    """BPTT for one direction; returns (dW_x, dW_h, db, dxs)."""
    hdim = w_h.shape[1]
    dw_x = np.zeros_like(w_x)
    dw_h = np.zeros_like(w_h)
    db = np.zeros(4 * hdim, dtype=w_x.dtype)
    dxs = []
    dh = dh_last.astype(w_x.dtype, copy=True)
    dc = np.zeros(hdim, dtype=w_x.dtype)
    for x, h_prev, c_prev, i, f, g, o, tanh_c in reversed(steps):
        do = dh * tanh_c
        dc = dc + dh * o * (1.0 - tanh_c**2)
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dz = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g**2),
                do * o * (1.0 - o),
            ]
        )
        dw_x += np.outer(dz, x)
        dw_h += np.outer(dz, h_prev)
        db += dz
        dxs.append(w_x.T @ dz)
        dh = w_h.T @ dz
        dc = dc * f
    dxs.reverse()
    return dw_x, dw_h, db, dxs


def encode_caption(ids, params):
    """Encode token ids into the caption code h of dimension 2*hidden.

    Returns (h, cache); the cache feeds encoder_backward during training.
    """
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size == 0:
        raise ValueError("cannot encode an empty token sequence")
    embed = params["text.embed"]
    if ids.min() < 0 or ids.max() >= embed.shape[0]:
        raise IndexError("token id outside the embedding table")
    xs = embed[ids]
    h_fwd, steps_fwd = _run_direction(
        xs, params["text.fwd.w_x"], params["text.fwd.w_h"], params["text.fwd.b"]
    )
    h_bwd, steps_bwd = _run_direction(
        xs[::-1], params["text.bwd.w_x"], params["text.bwd.w_h"], params["text.bwd.b"]
    )
    h = np.concatenate([h_fwd, h_bwd])
    cache = {"ids": ids, "steps_fwd": steps_fwd, "steps_bwd": steps_bwd}
    return h, cache


def encoder_backward(dh, cache, params, grads):
    """Accumulate caption-encoder gradients for one sequence into ``grads``."""
    hdim = params["text.fwd.w_h"].shape[1]
    ids = cache["ids"]
    for direction, dpart, steps in (
        ("fwd", dh[:hdim], cache["steps_fwd"]),
        ("bwd", dh[hdim:], cache["steps_bwd"]),
    ):
        w_x = params[f"text.{direction}.w_x"]
        w_h = params[f"text.{direction}.w_h"]
        dw_x, dw_h, db, dxs = _direction_backward(dpart, steps, w_x, w_h)
        grads[f"text.{direction}.w_x"] += dw_x
        grads[f"text.{direction}.w_h"] += dw_h
        grads[f"text.{direction}.b"] += db
        order = ids if direction == "fwd" else ids[::-1]
        for tok, dx in zip(order, dxs):
            grads["text.embed"][tok] += dx


def encode_batch(id_lists, params):
    """Encode a list of id sequences; returns (B, 2H) codes and caches."""
    hs = []
    caches = []
    for ids in id_lists:
        h, cache = encode_caption(ids, params)
        hs.append(h)
        caches.append(cache)
    return np.stack(hs), caches
