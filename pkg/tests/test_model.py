import math

import numpy as np
import pytest

from msape.model import (
    BIAS_MASK,
    ModelConfig,
    NoiseConfig,
    PairingError,
    Transformer,
    VocabularyRangeError,
    inject_noise,
    positional_encoding,
)
from msape.numerics import ConfigError, Tensor, grad_check, layer_norm, no_grad, ops, softmax
from msape.training import batch_loss

from helpers import tiny_model


def test_config_validation():
    with pytest.raises(ConfigError):
        ModelConfig(vocab_size=10, d_model=10, n_heads=3)
    with pytest.raises(ConfigError):
        ModelConfig(vocab_size=0)
    cfg = ModelConfig(vocab_size=100)
    assert (cfg.n_layers, cfg.d_model, cfg.d_ffn, cfg.n_heads, cfg.dropout) == (6, 512, 2048, 8, 0.1)


def test_positional_encoding_at_zero():
    table = positional_encoding(4, 6)
    np.testing.assert_array_equal(table[0, 0::2], 0.0)
    np.testing.assert_array_equal(table[0, 1::2], 1.0)
    assert table[3, 2] == pytest.approx(math.sin(3 / 10000 ** (2 / 6)))
    assert table[3, 3] == pytest.approx(math.cos(3 / 10000 ** (2 / 6)))


def test_embedding_shape_and_positional_difference(model):
    out = model.embed(np.array([[5, 7, 5]]))
    assert out.shape == (1, 3, 8)
    diff = out.data[0, 2] - out.data[0, 0]
    np.testing.assert_allclose(diff, model._pos[2] - model._pos[0], atol=1e-12)


def test_full_size_embedding_shape():
    cfg = ModelConfig(vocab_size=30, n_layers=1)
    m = Transformer(cfg)
    assert m.embed(np.arange(12)[None] % 30).shape == (1, 12, 512)


def test_embedding_rejects_bad_ids(model):
    with pytest.raises(VocabularyRangeError):
        model.embed(np.array([[1, 99]]))


# adaptive noise


def test_noise_zero_strength_is_identity():
    x = Tensor(np.random.default_rng(0).standard_normal((2, 3, 4)))
    out = inject_noise(x, NoiseConfig(strength=0.0), np.random.default_rng(1))
    assert np.array_equal(out.data, x.data)


def test_noise_hand_example():
    emb = Tensor(np.array([[1.0, -1.0], [2.0, 0.0]]))
    out = inject_noise(emb, NoiseConfig(strength=0.2), noise=np.ones((2, 2)))
    np.testing.assert_allclose(out.data, [[1.2, -0.8], [2.2, 0.2]], atol=1e-15)


def test_noise_negative_strength_rejected():
    with pytest.raises(ConfigError):
        NoiseConfig(strength=-0.1)
    with pytest.raises(ConfigError):
        cfg = NoiseConfig()
        cfg.strength = -1.0
        inject_noise(Tensor(np.ones(2)), cfg, np.random.default_rng(0))


@pytest.mark.parametrize("dist,std_factor", [("gaussian", 1.0), ("uniform", 1 / math.sqrt(3))])
def test_noise_monte_carlo(dist, std_factor):
    rng = np.random.default_rng(0)
    emb = Tensor(rng.standard_normal((1000, 1000)))
    m = np.abs(emb.data).mean()
    delta = inject_noise(emb, NoiseConfig(0.2, dist), rng).data - emb.data
    assert abs(delta.std() / (0.2 * m * std_factor) - 1.0) < 0.02
    stderr = delta.std() / math.sqrt(delta.size)
    assert abs(delta.mean()) < 3 * stderr


def test_noise_scale_is_linear_in_embeddings():
    rng = np.random.default_rng(1)
    emb = rng.standard_normal((3, 5))
    noise = rng.standard_normal((3, 5))
    cfg = NoiseConfig(0.2)
    for c in (0.5, 2.0, 8.0):
        base = inject_noise(Tensor(emb), cfg, noise=noise).data - emb
        scaled = inject_noise(Tensor(c * emb), cfg, noise=noise).data - c * emb
        np.testing.assert_allclose(scaled, c * base, rtol=1e-12)


def test_noise_passes_gradient_straight_through():
    x = Tensor(np.random.default_rng(2).standard_normal((2, 3)), requires_grad=True)
    w = np.arange(6.0).reshape(2, 3)
    ops.sum(inject_noise(x, NoiseConfig(0.5), np.random.default_rng(0)) * w).backward()
    np.testing.assert_array_equal(x.grad, w)


# encoders and decoder


def test_stack_shapes(model, batch):
    src = model.encode_source(batch.src, batch.src_pad)
    assert src.shape == (2, batch.src.shape[1], 8)
    mt = model.encode_mt(batch.mt, batch.mt_pad, src, batch.src_pad)
    assert mt.shape == (2, batch.mt.shape[1], 8)
    dec = model.decode_states(batch.pe[:, :-1], src, batch.src_pad, mt, batch.mt_pad)
    assert dec.shape == (2, batch.pe.shape[1] - 1, 8)
    assert model.logits(dec).shape == (2, batch.pe.shape[1] - 1, 20)


def test_zero_layer_stack_returns_embedding(allowed):
    m = tiny_model(allowed, n_layers=0)
    ids = np.array([[1, 5, 2]])
    np.testing.assert_array_equal(m.encode_source(ids, ids == 0).data, m.embed(ids).data)


def test_pad_tail_does_not_affect_real_positions(model):
    a = np.array([[1, 5, 6, 2, 0, 0]])
    b = np.array([[1, 5, 6, 2, 0, 0, 0, 0]])
    out_a = model.encode_source(a, a == 0).data[0, :4]
    out_b = model.encode_source(b, b == 0).data[0, :4]
    np.testing.assert_allclose(out_a, out_b, atol=1e-12)


def test_mt_encoder_pairing_error(model, batch):
    src = model.encode_source(batch.src[:1], batch.src_pad[:1])
    with pytest.raises(PairingError):
        model.encode_mt(batch.mt, batch.mt_pad, src, batch.src_pad[:1])


def test_zeroed_cross_attention_reduces_to_self_attention_and_ffn(allowed):
    m = tiny_model(allowed, n_layers=1)
    m.params["mt.0.cross.wo"].data[:] = 0
    m.params["mt.0.cross.bo"].data[:] = 0
    src = np.array([[1, 5, 6, 2]])
    mt = np.array([[1, 7, 8, 2]])
    with no_grad():
        got = m.encode_mt(mt, mt == 0, m.encode_source(src, src == 0), src == 0).data
        p = m.params
        x = m.embed(mt)
        x = m._attention_sublayer("mt.0.self", x, x, m.key_mask(mt == 0), False, None)
        x = layer_norm(x, p["mt.0.cross.ln.gain"], p["mt.0.cross.ln.bias"], m.config.ln_eps)
        x = m._ffn_sublayer("mt.0.ffn", x, False, None)
    np.testing.assert_allclose(got, x.data, atol=1e-12)


def test_mt_encoder_gradient_reaches_source_encoder(model, batch):
    # a random projection: a plain sum of a layer-normed output is flat
    w = np.random.default_rng(0).standard_normal((2, batch.mt.shape[1], 8))

    def f():
        src = model.encode_source(batch.src, batch.src_pad)
        return ops.sum(model.encode_mt(batch.mt, batch.mt_pad, src, batch.src_pad) * w)

    model.zero_grad()
    f().backward()
    g = model.params["src.0.ffn.w1"].grad
    assert g is not None and np.abs(g).max() > 0
    assert grad_check(f, model.params["src.0.ffn.w1"], indices=[0, 5, 17]) < 1e-4


def test_decoder_causality(model, batch):
    src = model.encode_source(batch.src, batch.src_pad)
    mt = model.encode_mt(batch.mt, batch.mt_pad, src, batch.src_pad)
    rng = np.random.default_rng(0)
    prefix = np.array([[1, 4, 10, 7, 3], [1, 12, 13, 14, 9]])
    base = model.decode_states(prefix, src, batch.src_pad, mt, batch.mt_pad).data
    for t in range(prefix.shape[1] - 1):
        changed = prefix.copy()
        changed[:, t + 1 :] = rng.integers(3, 20, size=changed[:, t + 1 :].shape)
        out = model.decode_states(changed, src, batch.src_pad, mt, batch.mt_pad).data
        np.testing.assert_allclose(out[:, : t + 1], base[:, : t + 1], atol=1e-12)


# classifier


def test_bias_mask_and_zero_probability(allowed, batch):
    m = tiny_model(allowed, dtype="float32")
    bias = m.params["classifier.bias"].data
    assert np.all(bias[~allowed] == np.float32(BIAS_MASK))
    assert np.all(bias[allowed] == 0)
    src = m.encode_source(batch.src, batch.src_pad)
    mt = m.encode_mt(batch.mt, batch.mt_pad, src, batch.src_pad)
    probs = softmax(m.logits(m.decode_states(batch.pe[:, :-1], src, batch.src_pad, mt, batch.mt_pad))).data
    assert probs.dtype == np.float32
    assert np.all(probs[..., ~allowed] == 0.0)


def test_classifier_weight_is_the_embedding(model):
    states = Tensor(np.random.default_rng(0).standard_normal((1, 2, 8)))
    before_logits = model.logits(states).data.copy()
    before_emb = model.embed(np.array([[5]])).data.copy()
    model.embedding.data[5] += 1.0
    assert not np.allclose(model.logits(states).data[..., 5], before_logits[..., 5])
    assert not np.allclose(model.embed(np.array([[5]])).data, before_emb)


def test_full_model_gradient_check(model, batch):
    """Three coordinates of every parameter; the acceptance suite checks all of them."""
    f = lambda: batch_loss(model, batch, "ape", 0.1, training=False)
    worst = max(grad_check(f, p, h=1e-4, indices=[0, p.data.size // 2, p.data.size - 1]) for p in model.params.values())
    assert worst < 1e-3
