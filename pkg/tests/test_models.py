import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vulnscan import numcore as nc
from vulnscan.models import (
    HEAD_OF,
    Checkpoint,
    CheckpointError,
    Head,
    Variant,
    attention,
    bert_encode,
    chain_segments,
    classifier_logits,
    classify,
    encode_segments,
    forward_logits,
    init_params,
    lstm_states,
    lstm_step,
    mlm_loss,
    predict,
    predict_sequence,
    prediction_from_logits,
    preset,
    transformer_block,
)
from vulnscan.models.pipeline import bilstm_features
from vulnscan.tokenizer import CLS, N_SPECIAL, PAD, Segment, TokenSequence, Vocabulary, segment


def tiny(variant, **kw):
    fields = dict(vocab_size=300, d_model=8, n_layers=1, n_heads=2, d_ff=16, seg_len=6, n_classes=5)
    fields.update(kw)
    return preset("desk", variant, **fields)


def zeroed(params, prefix=""):
    for name, t in params.items():
        if name.startswith(prefix):
            t.data[...] = 0.0
    return params


def T(a):
    return nc.Tensor(np.asarray(a, dtype=float))


def sig(x):
    return 1 / (1 + np.exp(-x))


# -- LSTM --------------------------------------------------------------------


def test_lstm_step_matches_hand_formula(rng):
    params = init_params(tiny(Variant.LSTM))
    x, h, c = rng.normal(size=8), rng.normal(size=8), rng.normal(size=8)
    Wx, Wh, b = (params[f"lstm.fwd.{n}"].data for n in ("w_x", "w_h", "b"))
    z = x @ Wx + h @ Wh + b
    i, f, o, g = sig(z[:8]), sig(z[8:16]), sig(z[16:24]), np.tanh(z[24:])
    c_want = f * c + i * g
    h_new, c_new = lstm_step(T(x), T(h), T(c), params)
    np.testing.assert_allclose(c_new.data, c_want, rtol=1e-12)
    np.testing.assert_allclose(h_new.data, o * np.tanh(c_want), rtol=1e-12)


def test_lstm_step_with_zero_weights_from_zero_state_stays_zero():
    params = zeroed(init_params(tiny(Variant.LSTM)))
    h, c = lstm_step(T(np.ones(8)), T(np.zeros(8)), T(np.zeros(8)), params)
    assert np.all(h.data == 0) and np.all(c.data == 0)


def test_saturated_forget_gate_keeps_memory():
    params = zeroed(init_params(tiny(Variant.LSTM)))
    b = params["lstm.fwd.b"].data
    b[:8], b[8:16] = -100.0, 100.0  # input shut, forget open
    c0 = np.linspace(-1, 1, 8)
    _, c = lstm_step(T(np.ones(8)), T(np.zeros(8)), T(c0), params)
    np.testing.assert_allclose(c.data, c0, atol=1e-12)


def test_lstm_states_agree_with_repeated_steps(rng):
    params = init_params(tiny(Variant.LSTM))
    x = rng.normal(size=(5, 8))
    h = c = T(np.zeros(8))
    stepped = []
    for t in range(5):
        h, c = lstm_step(T(x[t]), h, c, params)
        stepped.append(h.data)
    np.testing.assert_allclose(lstm_states(T(x), params, "lstm.fwd").data, stepped, rtol=1e-12)


def test_bilstm_palindrome_with_tied_directions(rng):
    params = init_params(tiny(Variant.BILSTM))
    for n in ("w_x", "w_h", "b"):
        params[f"lstm.bwd.{n}"] = params[f"lstm.fwd.{n}"]
    f = bilstm_features([7, 40, 99, 40, 7], params).data
    np.testing.assert_allclose(f[:8], f[8:], rtol=1e-12)
    assert tiny(Variant.BILSTM).feature_dim == 16


# -- attention and transformer -------------------------------------------------


def _one_head(params, prefix):
    p = {k: v.data for k, v in params.items() if k.startswith(prefix)}
    return {k[len(prefix) + 1:]: v for k, v in p.items()}


def test_attention_two_tokens_brute_force(rng):
    cfg = tiny(Variant.BERT_LSTM, n_heads=1)
    params = init_params(cfg)
    x = rng.normal(size=(2, 8))
    w = _one_head(params, "block0.attn")
    q, k, v = (x @ w[f"w{n}"] + w[f"b{n}"] for n in "qkv")
    out = np.zeros((2, 8))
    for a in range(2):
        s = np.array([q[a] @ k[b] / math.sqrt(8) for b in range(2)])
        p = np.exp(s - s.max()) / np.exp(s - s.max()).sum()
        out[a] = (p[0] * v[0] + p[1] * v[1]) @ w["wo"] + w["bo"]
    got = attention(T(x), [1, 1], params, "block0.attn", 1).data
    np.testing.assert_allclose(got, out, rtol=1e-10)


def test_attention_single_position_is_value_projection(rng):
    params = init_params(tiny(Variant.BERT_RNN))
    x = rng.normal(size=(1, 8))
    w = _one_head(params, "block0.attn")
    want = (x @ w["wv"] + w["bv"]) @ w["wo"] + w["bo"]
    np.testing.assert_allclose(attention(T(x), [1], params, "block0.attn", 2).data, want, rtol=1e-12)


def test_attention_weights_are_distributions_ignoring_pad(rng):
    params = init_params(tiny(Variant.BERT_LSTM))
    x = rng.normal(size=(3, 6, 8))
    mask = np.array([[1, 1, 1, 0, 0, 0], [1] * 6, [1, 0, 0, 0, 0, 0]])
    _, weights = attention(T(x), mask, params, "block0.attn", 2, return_weights=True)
    np.testing.assert_allclose(weights.sum(axis=-1), 1.0, atol=1e-12)
    for s in range(3):
        assert np.all(weights[s][..., mask[s] == 0] == 0.0)


def test_key_bias_cancels_in_softmax(rng):
    params = init_params(tiny(Variant.BERT_LSTM))
    x = T(rng.normal(size=(6, 8)))
    before = attention(x, np.ones(6), params, "block0.attn", 2).data
    params["block0.attn.bk"].data[...] = rng.normal(size=8) * 3
    np.testing.assert_allclose(attention(x, np.ones(6), params, "block0.attn", 2).data, before, atol=1e-12)


def test_block_with_zero_sublayers_is_identity(rng):
    params = zeroed(init_params(tiny(Variant.BERT_LSTM)), "block0.attn")
    zeroed(params, "block0.ff")
    x = rng.normal(size=(6, 8))
    np.testing.assert_array_equal(transformer_block(T(x), np.ones(6), params, "block0", 2).data, x)


def test_cls_output_ignores_pad_contents():
    cfg = tiny(Variant.BERT_LSTM, n_layers=2)
    params = init_params(cfg)
    a = Segment((CLS, 10, 11, PAD, PAD, PAD), (1, 1, 1, 0, 0, 0))
    b = Segment((CLS, 10, 11, 77, 200, 5), (1, 1, 1, 0, 0, 0))
    np.testing.assert_allclose(bert_encode(a, params, cfg).data, bert_encode(b, params, cfg).data, rtol=1e-12)


def test_zero_layers_returns_embedded_cls():
    cfg = tiny(Variant.BERT_RNN, n_layers=0)
    params = init_params(cfg)
    seg = segment(TokenSequence((9, 10), (1, 1)), cfg.seg_len)[0]
    want = params["embed.tokens"].data[CLS] + params["embed.positions"].data[0]
    np.testing.assert_array_equal(bert_encode(seg, params, cfg).data, want)


def test_encode_segments_rejects_wrong_length():
    cfg = tiny(Variant.BERT_RNN)
    with pytest.raises(nc.ShapeError):
        encode_segments(np.zeros((1, 4), dtype=int), np.ones((1, 4)), init_params(cfg), cfg)


# -- heads and classifier --------------------------------------------------------


def test_rnn_head_single_segment_formula(rng):
    params = init_params(tiny(Variant.BERT_RNN))
    v = rng.normal(size=8)
    want = np.tanh(v @ params["head.rnn.w_x"].data + params["head.rnn.b"].data)
    np.testing.assert_allclose(chain_segments([T(v)], Head.VANILLA_RNN, params).data, want, rtol=1e-12)


@pytest.mark.parametrize("variant", [Variant.BERT_RNN, Variant.BERT_LSTM])
def test_unidirectional_heads_depend_on_order(variant, rng):
    params = init_params(tiny(variant))
    vs = [T(rng.normal(size=8)) for _ in range(3)]
    a = chain_segments(vs, HEAD_OF[variant], params).data
    b = chain_segments(vs[::-1], HEAD_OF[variant], params).data
    assert not np.allclose(a, b)


def test_chain_rejects_empty():
    with pytest.raises(ValueError):
        chain_segments([], Head.LSTM, {})


def test_zero_classifier_is_uniform_with_lowest_argmax():
    params = zeroed(init_params(tiny(Variant.LSTM)), "cls")
    pred = classify(T(np.ones(8)), params)
    np.testing.assert_allclose(pred.distribution, 0.2)
    assert pred.argmax_label == 0
    assert [k for k, _ in pred.top(3)] == [0, 1, 2]


def test_three_class_softmax_oracle():
    pred = prediction_from_logits(np.array([1.0, 2.0, 3.0]))
    e = np.exp([1.0, 2.0, 3.0])
    np.testing.assert_allclose(pred.distribution, e / e.sum(), rtol=1e-14)
    assert pred.argmax_label == 2
    assert pred.log_prob(0) == pytest.approx(math.log(e[0] / e.sum()))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-30, 30), min_size=2, max_size=10), st.floats(-100, 100))
def test_softmax_shift_invariance(logits, shift):
    a = prediction_from_logits(np.array(logits)).distribution
    b = prediction_from_logits(np.array(logits) + shift).distribution
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_classifier_feature_mismatch():
    params = init_params(tiny(Variant.BILSTM))
    with pytest.raises(nc.ShapeError):
        classifier_logits(T(np.ones(8)), params)


# -- MLM -----------------------------------------------------------------------


def _segments(cfg, n=3):
    rng = np.random.default_rng(3)
    seqs = [TokenSequence(tuple(rng.integers(N_SPECIAL, cfg.vocab_size, size=9).tolist()), (1,) * 9) for _ in range(n)]
    return [s for q in seqs for s in segment(q, cfg.seg_len)]


def test_mlm_with_zero_rate_is_zero():
    cfg = tiny(Variant.BERT_LSTM)
    assert mlm_loss(_segments(cfg), init_params(cfg), cfg, mask_rate=0.0).item() == 0.0


def test_mlm_with_uniform_logits_is_log_vocab():
    cfg = tiny(Variant.BERT_LSTM)
    params = zeroed(init_params(cfg), "embed.tokens")
    loss = mlm_loss(_segments(cfg), params, cfg, mask_rate=0.5)
    assert loss.item() == pytest.approx(math.log(cfg.vocab_size), rel=1e-12)


# -- pipeline --------------------------------------------------------------------


@pytest.mark.parametrize("variant", list(Variant))
def test_predict_empty_and_long_inputs(variant):
    cfg = tiny(variant)
    params = init_params(cfg)
    for ids in [(), tuple(range(5, 40))]:
        pred = predict_sequence(TokenSequence(ids, (1,) * len(ids)), cfg, params)
        assert pred.distribution.shape == (5,)
        assert abs(pred.distribution.sum() - 1) < 1e-12


@pytest.mark.parametrize("variant", list(Variant))
def test_batched_logits_match_single_predictions(variant):
    cfg = tiny(variant)
    params = init_params(cfg)
    seqs = [TokenSequence(tuple(range(5, 5 + n)), (1,) * n) for n in (3, 12)]
    batch = forward_logits(cfg, params, seqs).data
    for row, s in zip(batch, seqs):
        np.testing.assert_allclose(row, predict_sequence(s, cfg, params).logits, rtol=1e-10)


def test_bert_prediction_exposes_pooled_segments():
    cfg = tiny(Variant.BERT_BILSTM)
    pred = predict_sequence(TokenSequence(tuple(range(5, 17)), (1,) * 12), cfg, init_params(cfg))
    assert len(pred.per_segment_pooled) == 3 and pred.per_segment_pooled[0].shape == (8,)


def test_predict_checks_vocab_size():
    cfg = tiny(Variant.LSTM)
    with pytest.raises(nc.ShapeError):
        predict("int x;", Vocabulary(), cfg, init_params(cfg))


def test_init_is_seeded():
    a, b = init_params(tiny(Variant.BERT_BILSTM)), init_params(tiny(Variant.BERT_BILSTM))
    c = init_params(tiny(Variant.BERT_BILSTM, seed=1))
    assert all(np.array_equal(a[k].data, b[k].data) for k in a)
    assert not np.array_equal(a["cls.w"].data, c["cls.w"].data)


def test_paper_preset_dimensions():
    cfg = preset("paper", "bert-lstm", vocab_size=32000)
    assert (cfg.n_layers, cfg.d_model, cfg.n_heads, cfg.seg_len) == (12, 768, 12, 256)
    with pytest.raises(ValueError):
        preset("desk", "bert-lstm", vocab_size=300, n_heads=5)


# -- checkpoints -----------------------------------------------------------------


def test_checkpoint_roundtrip(tmp_path):
    cfg = tiny(Variant.BERT_LSTM)
    ckpt = Checkpoint(cfg, init_params(cfg), tuple(f"T{i}" for i in range(5)))
    ckpt.save(tmp_path / "m.ckpt")
    back = Checkpoint.load(tmp_path / "m.ckpt", config=cfg, n_labels=5)
    assert back.config == cfg and back.labels == ckpt.labels
    assert all(np.array_equal(back.params[k].data, ckpt.params[k].data) for k in ckpt.params)
    assert back.to_bytes() == ckpt.to_bytes()


def test_checkpoint_rejections():
    cfg = tiny(Variant.LSTM)
    params = init_params(cfg)
    blob = Checkpoint(cfg, params).to_bytes()
    with pytest.raises(CheckpointError):
        Checkpoint.from_bytes(blob, config=tiny(Variant.BILSTM))
    with pytest.raises(CheckpointError):
        Checkpoint.from_bytes(blob, n_labels=124)
    with pytest.raises(CheckpointError):
        Checkpoint.from_bytes(blob[:-5])
    with pytest.raises(CheckpointError):
        Checkpoint.from_bytes(b"garbage")
    params["cls.b"].data[0] = np.nan
    with pytest.raises(CheckpointError):
        Checkpoint.from_bytes(Checkpoint(cfg, params).to_bytes())
