import numpy as np
import pytest

from lang2color.encoder import (
    TextConfig,
    encode_batch,
    encode_caption,
    encoder_backward,
    init_text_params,
)

from .conftest import relative_error


def _params(vocab=9, embed=3, hidden=4, seed=3):
    config = TextConfig(vocab_size=vocab, embed_dim=embed, hidden_dim=hidden)
    rng = np.random.default_rng(seed)
    params = init_text_params(config, rng, np.float64)
    # nonzero biases so their gradients are informative
    params["text.fwd.b"] = rng.normal(0, 0.2, 4 * hidden)
    params["text.bwd.b"] = rng.normal(0, 0.2, 4 * hidden)
    return config, params


def test_output_dimension():
    config = TextConfig(vocab_size=20, embed_dim=8, hidden_dim=64)
    params = init_text_params(config, np.random.default_rng(0), np.float64)
    h, _ = encode_caption(np.array([2, 3, 4]), params)
    assert h.shape == (128,)


def test_zero_parameters_give_zero_code():
    config, params = _params()
    zeros = {k: np.zeros_like(v) for k, v in params.items()}
    h, _ = encode_caption(np.array([1, 2]), zeros)
    assert np.all(h == 0.0)


def test_repetition_changes_code():
    _, params = _params()
    h1, _ = encode_caption(np.array([4]), params)
    h2, _ = encode_caption(np.array([4, 4]), params)
    assert not np.allclose(h1, h2)


def test_deterministic():
    _, params = _params()
    ids = np.array([2, 5, 7])
    h1, _ = encode_caption(ids, params)
    h2, _ = encode_caption(ids, params)
    assert np.array_equal(h1, h2)


def test_rejects_empty_sequence():
    _, params = _params()
    with pytest.raises(ValueError):
        encode_caption(np.array([], dtype=np.int64), params)


def test_rejects_out_of_range_ids():
    _, params = _params(vocab=5)
    with pytest.raises(IndexError):
        encode_caption(np.array([7]), params)


def test_batch_matches_single():
    _, params = _params()
    seqs = [np.array([2, 3]), np.array([4])]
    hs, _ = encode_batch(seqs, params)
    for i, ids in enumerate(seqs):
        h, _ = encode_caption(ids, params)
        assert np.array_equal(hs[i], h)


def test_gradients_match_finite_differences():
    """Full-parameter BPTT check on a 2-token sequence, H=4."""
    _, params = _params()
    ids = np.array([2, 5])
    rng = np.random.default_rng(11)
    target = rng.normal(size=8)

    def loss_of(p):
        h, _ = encode_caption(ids, p)
        return 0.5 * float(np.sum((h - target) ** 2))

    h, cache = encode_caption(ids, params)
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    encoder_backward(h - target, cache, params, grads)

    eps = 1e-6
    worst = 0.0
    for name, g in grads.items():
        for flat in range(g.size):
            idx = np.unravel_index(flat, g.shape)
            plus = {k: v.copy() for k, v in params.items()}
            plus[name][idx] += eps
            minus = {k: v.copy() for k, v in params.items()}
            minus[name][idx] -= eps
            fd = (loss_of(plus) - loss_of(minus)) / (2 * eps)
            worst = max(worst, relative_error(fd, g[idx]))
    assert worst < 1e-4


def test_embedding_gradient_routes_to_used_tokens():
    _, params = _params()
    ids = np.array([2, 5])
    h, cache = encode_caption(ids, params)
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    encoder_backward(np.ones_like(h), cache, params, grads)
    used = np.abs(grads["text.embed"]).sum(axis=1)
    assert used[2] > 0 and used[5] > 0
    assert np.all(used[[0, 1, 3, 4, 6, 7, 8]] == 0)
