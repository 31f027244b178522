"""Class-rebalanced cross-entropy training of the colorization models."""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import evaluation
from .checkpoint import save_checkpoint, warm_start_load
from .encoder import TextConfig, encode_batch, encoder_backward, init_text_params
from .network import (
    NetworkConfig,
    backward,
    forward,
    init_network_params,
    trainable_names,
)
from .quantizer import (
    QuantizerSpec,
    WeightTable,
    compute_rebalancing_weights,
    default_epsilon,
)


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 16
    learning_rate: float = 1e-3
    lr_schedule: str = "cosine"
    seed: int = 0
    epsilon: float | None = None  # rebalancing smoothing; None = grid default
    eval_every: int = 1
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.lr_schedule not in ("cosine", "constant"):
            raise ValueError("lr_schedule must be cosine or constant")
        if self.eval_every < 1:
            raise ValueError("eval_every must be positive")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "lr_schedule": self.lr_schedule,
            "seed": self.seed,
            "epsilon": self.epsilon,
            "eval_every": self.eval_every,
            "checkpoint_dir": self.checkpoint_dir,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**{k: d[k] for k in cls().to_dict() if k in d})


# ---------------------------------------------------------------------------
# loss
# ---------------------------------------------------------------------------


def weighted_ce_loss(logits, targets, weights):
    """Mean over pixels of w_y * (-log softmax_y)."""
    loss, _ = weighted_ce_loss_grad(logits, targets, weights, want_grad=False)
    return loss


def weighted_ce_loss_grad(logits, targets, weights, want_grad=True):
    """Loss plus its gradient w.r.t. the logits.

    The gradient is w_y * (softmax - onehot) / num_pixels per pixel,
    matching the finite-difference check in the tests.
    """
    logits = np.asarray(logits)
    if not np.isfinite(logits).all():
        raise FloatingPointError("non-finite logits in the loss")
    b, k, h, w = logits.shape
    x = logits.transpose(0, 2, 3, 1).reshape(-1, k)
    y = np.asarray(targets).reshape(-1)
    if y.shape[0] != x.shape[0]:
        raise ValueError("logits and targets disagree on the pixel count")
    weights = np.asarray(weights)
    if weights.shape != (k,):
        raise ValueError(f"weights must have shape ({k},), got {weights.shape}")

    m = x.max(axis=1, keepdims=True)
    shifted = x - m
    exp = np.exp(shifted)
    sum_exp = exp.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(sum_exp)
    rows = np.arange(x.shape[0])
    w_y = weights[y].astype(np.float64)
    loss = float(np.mean(-w_y * log_probs[rows, y].astype(np.float64)))
    if not want_grad:
        return loss, None

    grad = exp / sum_exp
    grad[rows, y] -= 1.0
    grad *= (w_y / x.shape[0])[:, None].astype(grad.dtype)
    return loss, grad.reshape(b, h, w, k).transpose(0, 3, 1, 2)


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def init_adam(params, names) -> AdamState:
    state = AdamState()
    for name in names:
        state.m[name] = np.zeros_like(params[name])
        state.v[name] = np.zeros_like(params[name])
    return state


def adam_step(params, grads, state: AdamState, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    state.t += 1
    correction1 = 1.0 - beta1**state.t
    correction2 = 1.0 - beta2**state.t
    for name, g in grads.items():
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        params[name] -= (lr / correction1) * m / (
            np.sqrt(v / correction2) + eps
        )


def _epoch_lr(cfg: TrainConfig, epoch: int) -> float:
    if cfg.lr_schedule == "constant":
        return cfg.learning_rate
    return cfg.learning_rate * 0.5 * (1.0 + np.cos(np.pi * epoch / cfg.epochs))


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


@dataclass
class TrainResult:
    params: dict
    history: list
    weight_table: WeightTable
    checkpoint_path: str | None
    aborted: bool = False


def label_histogram(samples, num_labels: int) -> np.ndarray:
    """Pixel counts per class over a sample list."""
    hist = np.zeros(num_labels, dtype=np.int64)
    for sample in samples:
        hist += np.bincount(sample.labels.reshape(-1), minlength=num_labels)
    return hist


def build_metadata(
    *,
    quantizer: QuantizerSpec,
    net_config: NetworkConfig,
    text_config: TextConfig | None,
    train_config: TrainConfig,
    vocab,
    lexicon,
    weight_table: WeightTable | None,
    epoch: int,
    history: list,
) -> dict:
    meta = {
        "model_id": f"{net_config.fusion_mode}-{vocab.content_hash()[:8]}-s{train_config.seed}",
        "quantizer": quantizer.to_dict(),
        "network": net_config.to_dict(),
        "text": text_config.to_dict() if text_config else None,
        "train": train_config.to_dict(),
        "vocab_hash": vocab.content_hash(),
        "vocab": vocab.to_dict(),
        "lexicon": lexicon.to_dict(),
        "epoch": epoch,
        "history": history,
    }
    if weight_table is not None:
        meta["rebalancing"] = {
            "epsilon": weight_table.epsilon,
            "w": weight_table.weights.tolist(),
            "source_histogram": weight_table.source_histogram.tolist(),
        }
    return meta


def _validation_metrics(params, samples, net_config, batch_size):
    logits_batches = []
    target_batches = []
    for start in range(0, len(samples), batch_size):
        chunk = samples[start : start + batch_size]
        lightness = np.stack([s.lightness for s in chunk])
        h = None
        if net_config.fusion_mode != "none":
            h, _ = encode_batch([s.caption_ids[0] for s in chunk], params)
        result = forward(params, lightness, h, net_config, train=False)
        logits_batches.append(result.logits)
        target_batches.append(np.stack([s.labels for s in chunk]))
    logits = np.concatenate(logits_batches)
    targets = np.concatenate(target_batches)
    return (
        evaluation.topk_accuracy(logits, targets, 1),
        evaluation.topk_accuracy(logits, targets, 5),
    )


def train(
    train_samples,
    val_samples,
    *,
    vocab,
    lexicon,
    quantizer: QuantizerSpec,
    net_config: NetworkConfig,
    text_config: TextConfig | None,
    cfg: TrainConfig,
    dtype=np.float32,
    warm_start: dict | None = None,
    log=None,
) -> TrainResult:
    """Jointly train the backbone and (for fused modes) the text encoder.

    ``train_samples``/``val_samples`` are prepared samples carrying
    ``lightness`` (H, W), ``labels`` (h, w) and ``caption_ids`` (one id
    array per caption). One caption per image is drawn uniformly each
    epoch. ``warm_start`` optionally carries tensors from a previously
    trained (typically language-free) checkpoint; backbone conv and
    batch-norm weights are copied in before training. Runs are
    deterministic for a fixed seed.
    """
    if not train_samples:
        raise ValueError("training set is empty")
    fused = net_config.fusion_mode != "none"
    if fused:
        if text_config is None:
            raise ValueError("fused modes need a text config")
        if text_config.language_dim != net_config.language_dim:
            raise ValueError(
                f"text encoder produces dim {text_config.language_dim} but the "
                f"network expects {net_config.language_dim}"
            )

    rng = np.random.default_rng(cfg.seed)
    params = init_network_params(net_config, rng, dtype)
    if fused:
        params.update(init_text_params(text_config, rng, dtype))
    if warm_start is not None:
        report = warm_start_load(params, warm_start, net_config.language_dim)
        if log:
            loaded = sum(1 for _, action in report if not action.startswith("skipped"))
            log(f"warm start: {loaded}/{len(report)} tensors carried over")

    epsilon = cfg.epsilon if cfg.epsilon is not None else default_epsilon(quantizer)
    hist = label_histogram(train_samples, net_config.num_labels)
    weight_table = compute_rebalancing_weights(hist, epsilon)
    weights = weight_table.weights

    trainables = list(trainable_names(net_config))
    if fused:
        trainables += [name for name in params if name.startswith("text.")]
    adam = init_adam(params, trainables)

    checkpoint_path = None
    history_file = None
    if cfg.checkpoint_dir:
        os.makedirs(cfg.checkpoint_dir, exist_ok=True)
        checkpoint_path = os.path.join(cfg.checkpoint_dir, "last.ckpt")
        history_file = os.path.join(cfg.checkpoint_dir, "history.jsonl")
        open(history_file, "w").close()

    history = []
    n = len(train_samples)
    aborted = False
    for epoch in range(cfg.epochs):
        lr = _epoch_lr(cfg, epoch)
        order = rng.permutation(n)
        caption_pick = rng.integers(
            0, [max(1, len(train_samples[i].caption_ids)) for i in order]
        )
        epoch_loss = 0.0
        seen = 0
        try:
            for start in range(0, n, cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                picks = caption_pick[start : start + cfg.batch_size]
                batch = [train_samples[i] for i in idx]
                lightness = np.stack([s.lightness for s in batch])
                targets = np.stack([s.labels for s in batch])

                h = None
                text_caches = None
                if fused:
                    ids = [s.caption_ids[p] for s, p in zip(batch, picks)]
                    h, text_caches = encode_batch(ids, params)
                    h = h.astype(dtype)

                result = forward(params, lightness, h, net_config, train=True)
                loss, dlogits = weighted_ce_loss_grad(result.logits, targets, weights)
                if not np.isfinite(loss):
                    raise FloatingPointError("non-finite training loss")
                grads, dh = backward(dlogits, result.cache, params, net_config)
                if fused:
                    for name in params:
                        if name.startswith("text."):
                            grads[name] = np.zeros_like(params[name])
                    for i, cache in enumerate(text_caches):
                        encoder_backward(dh[i], cache, params, grads)
                adam_step(params, grads, adam, lr)
                epoch_loss += loss * len(batch)
                seen += len(batch)
        except FloatingPointError as exc:
            aborted = True
            if log:
                log(f"aborting at epoch {epoch + 1}: {exc}")
            break

        entry = {"epoch": epoch + 1, "loss": epoch_loss / max(seen, 1), "lr": lr}
        if val_samples and ((epoch + 1) % cfg.eval_every == 0 or epoch + 1 == cfg.epochs):
            acc1, acc5 = _validation_metrics(params, val_samples, net_config, cfg.batch_size)
            entry["acc1"] = acc1
            entry["acc5"] = acc5
        history.append(entry)
        if log:
            log(
                f"epoch {entry['epoch']}/{cfg.epochs} loss={entry['loss']:.4f}"
                + (f" acc1={entry['acc1']:.3f} acc5={entry['acc5']:.3f}" if "acc1" in entry else "")
            )
        if history_file:
            with open(history_file, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry) + "\n")
        if checkpoint_path:
            meta = build_metadata(
                quantizer=quantizer,
                net_config=net_config,
                text_config=text_config if fused else None,
                train_config=cfg,
                vocab=vocab,
                lexicon=lexicon,
                weight_table=weight_table,
                epoch=epoch + 1,
                history=history,
            )
            save_checkpoint(checkpoint_path, params, meta)

    return TrainResult(
        params=params,
        history=history,
        weight_table=weight_table,
        checkpoint_path=checkpoint_path,
        aborted=aborted,
    )
