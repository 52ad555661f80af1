import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sutrack.embedding import TokenSequence
from sutrack.encoder import Block, Encoder, EncoderConfig
from sutrack.heads import TaskHead, TrackHead, pool_tokens, task_logits, track_head
from sutrack.numerics import F, Tensor, gradcheck


def _ln(x, eps=1e-5):
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps)


def _gelu(x):
    return 0.5 * x * (1 + np.tanh(math.sqrt(2 / math.pi) * (x + 0.044715 * x**3)))


# --- encoder ---------------------------------------------------------------

def test_config_checks():
    with pytest.raises(ValueError):
        EncoderConfig(dim=10, heads=4)
    with pytest.raises(ValueError):
        EncoderConfig(depth=-1)


def test_width_mismatch_rejected():
    enc = Encoder(np.random.default_rng(0), EncoderConfig(depth=1, dim=8, heads=2))
    with pytest.raises(ValueError):
        enc(Tensor(np.zeros((3, 6))))


def test_depth_zero_is_final_norm_only():
    enc = Encoder(np.random.default_rng(0), EncoderConfig(depth=0, dim=8, heads=2))
    x = np.random.default_rng(1).normal(size=(5, 8))
    assert np.allclose(enc(Tensor(x)).data, _ln(x), rtol=0, atol=1e-14)


def test_uniform_attention_block_by_hand():
    d = 4
    rng = np.random.default_rng(2)
    blk = Block(rng, EncoderConfig(depth=1, dim=d, heads=1, mlp_ratio=2.0))
    w = np.zeros((3 * d, d))
    w[2 * d :] = np.eye(d)  # q = k = 0, v = identity
    blk.attn.qkv.weight.data = w
    blk.attn.qkv.bias.data = np.zeros(3 * d)
    blk.attn.proj.weight.data = np.eye(d)
    blk.attn.proj.bias.data = np.zeros(d)
    x = rng.normal(size=(3, d))
    # attention is uniform, so every token receives the mean of LN(x)
    h = x + _ln(x).mean(axis=0, keepdims=True)
    l1, l2 = blk.mlp.layers
    mlp = _gelu(_ln(h) @ l1.weight.data.T + l1.bias.data) @ l2.weight.data.T + l2.bias.data
    assert np.allclose(blk(Tensor(x)).data, h + mlp, rtol=0, atol=1e-13)


def test_encoder_is_permutation_equivariant():
    enc = Encoder(np.random.default_rng(0), EncoderConfig(depth=2, dim=8, heads=2))
    x = np.random.default_rng(1).normal(size=(6, 8))
    perm = np.array([0, 3, 2, 1, 5, 4])
    a = enc(Tensor(x)).data
    b = enc(Tensor(x[perm])).data
    assert np.allclose(a[perm], b, rtol=0, atol=1e-12)


def test_encoder_finite_on_bounded_inputs():
    enc = Encoder(np.random.default_rng(0), EncoderConfig())
    x = np.random.default_rng(1).uniform(-10, 10, (2, 25, 64))
    assert np.all(np.isfinite(enc(Tensor(x)).data))


def test_encoder_gradcheck_depth_two():
    enc = Encoder(np.random.default_rng(0), EncoderConfig(depth=2, dim=8, heads=2))
    w = np.random.default_rng(1).normal(size=(4, 8))
    x = np.random.default_rng(2).normal(size=(4, 8))
    ok, worst = gradcheck(lambda t: F.sum(enc(t) * w), [x])
    assert ok, worst


def test_encoder_parameters_in_encoder_group():
    enc = Encoder(np.random.default_rng(0), EncoderConfig(depth=1, dim=8, heads=2))
    assert {p.group for p in enc.parameters()} == {"encoder"}


# --- box head --------------------------------------------------------------

def test_zero_head_gives_half_scores():
    head = TrackHead(np.random.default_rng(0), 8, 16)
    for p in head.parameters():
        p.data = np.zeros_like(p.data)
    out = head(Tensor(np.random.default_rng(1).normal(size=(16, 8))))
    assert np.array_equal(out.score.data, np.full((4, 4), 0.5))
    assert out.grid == 4 and out.offset.shape == (4, 4, 2) and out.size.shape == (4, 4, 2)


def test_large_score_bias_saturates():
    head = TrackHead(np.random.default_rng(0), 8, 16)
    head.score.layers[-1].bias.data = np.array([10.0])
    head.score.layers[-1].weight.data = np.zeros_like(head.score.layers[-1].weight.data)
    out = head(Tensor(np.random.default_rng(1).normal(size=(2, 16, 8))))
    assert np.all(out.score.data > 0.9999)


def test_non_square_span_rejected():
    head = TrackHead(np.random.default_rng(0), 8, 16)
    with pytest.raises(ValueError):
        track_head(Tensor(np.zeros((15, 8))), head)


def test_head_branches_are_per_token():
    head = TrackHead(np.random.default_rng(0), 8, 16)
    tokens = Tensor(np.random.default_rng(1).normal(size=(16, 8)), requires_grad=True)
    out = head(tokens)
    F.sum(out.score[1, 2] + out.size[1, 2, 0] + out.offset[1, 2, 1]).backward()
    nonzero = np.flatnonzero(np.abs(tokens.grad).sum(axis=1))
    assert list(nonzero) == [1 * 4 + 2]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_head_output_ranges(seed):
    head = TrackHead(np.random.default_rng(seed), 8, 16)
    out = head(Tensor(np.random.default_rng(seed + 1).normal(0, 3, (16, 8))))
    for t in (out.score, out.offset, out.size):
        assert np.all((t.data > 0) & (t.data < 1))


# --- task head and pooling -------------------------------------------------

def test_task_head_has_five_outputs():
    head = TaskHead(np.random.default_rng(0), 8)
    assert task_logits(Tensor(np.zeros((3, 25, 8))), head).shape == (3, 5)


def test_equal_tokens_pool_to_themselves():
    v = np.random.default_rng(0).normal(size=8)
    seq = TokenSequence(Tensor(np.tile(v, (5, 1))), {"search": (0, 5)})
    assert np.allclose(pool_tokens(seq).data, v, rtol=0, atol=1e-15)


def test_two_token_case_by_hand():
    head = TaskHead(np.random.default_rng(0), 4, hidden=3)
    a, b = np.array([1.0, 2.0, 3.0, 4.0]), np.array([-1.0, 0.0, 5.0, 2.0])
    avg = (a + b) / 2
    l1, l2, l3 = head.mlp.layers
    h = _gelu(avg @ l1.weight.data.T + l1.bias.data)
    h = _gelu(h @ l2.weight.data.T + l2.bias.data)
    want = h @ l3.weight.data.T + l3.bias.data
    got = task_logits(Tensor(np.stack([a, b])), head).data
    assert np.allclose(got, want, rtol=0, atol=1e-14)


def test_task_logits_permutation_invariant_exactly():
    # dyadic values make every partial sum exact whatever the order
    rng = np.random.default_rng(3)
    tokens = rng.integers(-64, 64, (8, 16)) / 8.0
    head = TaskHead(np.random.default_rng(0), 16)
    perm = rng.permutation(8)
    assert np.array_equal(task_logits(Tensor(tokens), head).data, task_logits(Tensor(tokens[perm]), head).data)


def test_task_logits_permutation_invariant_random():
    rng = np.random.default_rng(4)
    tokens = rng.normal(size=(25, 16))
    head = TaskHead(np.random.default_rng(0), 16)
    a = task_logits(Tensor(tokens), head).data
    b = task_logits(Tensor(tokens[rng.permutation(25)]), head).data
    assert np.allclose(a, b, rtol=0, atol=1e-12)


def test_pooling_modes():
    tokens = Tensor(np.arange(12.0).reshape(3, 4))
    seq = TokenSequence(tokens, {"search": (0, 1), "text": (1, 2), "task": (2, 3)})
    assert np.array_equal(pool_tokens(seq, "text_token").data, [4, 5, 6, 7])
    assert np.array_equal(pool_tokens(seq, "extra_task_token").data, [8, 9, 10, 11])
    with pytest.raises(ValueError):
        pool_tokens(TokenSequence(tokens, {"search": (0, 3)}), "text_token")
    with pytest.raises(ValueError):
        pool_tokens(seq, "max_pool")
