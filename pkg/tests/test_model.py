# Copyright (c) 2026, The lrplab developers
# All rights reserved.
#
# Redistribution and use in source and binary forms, with or without
# modification, are permitted provided that the following conditions are
# met:
#
# 1. Redistributions of source code must retain the above copyright
# notice, this list of conditions and the following disclaimer.
#
# 2. Redistributions in binary form must reproduce the above copyright
# notice, this list of conditions and the following disclaimer in the
# documentation and/or other materials provided with the distribution.
#
# THIS SOFTWARE IS PROVIDED BY THE COPYRIGHT HOLDERS AND CONTRIBUTORS
# "AS IS" AND ANY EXPRESS OR IMPLIED WARRANTIES, INCLUDING, BUT NOT
# LIMITED TO, THE IMPLIED WARRANTIES OF MERCHANTABILITY AND FITNESS FOR
# A PARTICULAR PURPOSE ARE DISCLAIMED. IN NO EVENT SHALL THE COPYRIGHT
# HOLDER OR CONTRIBUTORS BE LIABLE FOR ANY DIRECT, INDIRECT, INCIDENTAL,
# SPECIAL, EXEMPLARY, OR CONSEQUENTIAL DAMAGES (INCLUDING, BUT NOT
# LIMITED TO, PROCUREMENT OF SUBSTITUTE GOODS OR SERVICES; LOSS OF USE,
# DATA, OR PROFITS; OR BUSINESS INTERRUPTION) HOWEVER CAUSED AND ON ANY
# THEORY OF LIABILITY, WHETHER IN CONTRACT, STRICT LIABILITY, OR TORT
# (INCLUDING NEGLIGENCE OR OTHERWISE) ARISING IN ANY WAY OUT OF THE USE
# OF THIS SOFTWARE, EVEN IF ADVISED OF THE POSSIBILITY OF SUCH DAMAGE.

import numpy as np
import pytest
from asserts import assert_close, assert_models_equal
from make_randoms import (
    encoder_d_model,
    encoder_num_classes,
    encoder_seq_len,
    make_rng,
    qkv_num_classes,
    random_image,
    random_tokens,
    small_encoder,
    small_qkv_pair,
)

from lrplab import model as lm
from lrplab.exceptions import ShapeError


def test_layer_spec_requires_known_kind_and_widths():
    with pytest.raises(ValueError):
        lm.LayerSpec("conv", "c1", d_in=1, d_out=1)
    with pytest.raises(ValueError):
        lm.LayerSpec("linear", "lin1", d_in=1)


def test_layer_spec_dict_form():
    spec = lm.LayerSpec("softmax_attention", "attn1", d_in=4, d_out=4, d_k=4, index=1)
    assert lm.LayerSpec.from_dict(spec.to_dict()) == spec
    assert spec.param_names() == ("attn1.W_Q", "attn1.W_K", "attn1.W_V", "attn1.W_O")
    assert hash(lm.LayerSpec.from_dict(spec.to_dict())) == hash(spec)


def test_model_graph_validates_parameters():
    layers = lm.qkv_layers("av_first", 4, 2, 3)
    params = lm.init_params(layers, 0)
    bad = dict(params)
    bad["attn1.W_Q"] = np.zeros((3, 2))
    with pytest.raises(ShapeError):
        lm.ModelGraph(layers, bad)
    missing = dict(params)
    del missing["out.b"]
    with pytest.raises(KeyError):
        lm.ModelGraph(layers, missing)
    with pytest.raises(ShapeError):
        lm.ModelGraph(
            [layers[0], lm.LayerSpec("mean_pool", "pool", d_in=5, d_out=5)],
            params,
        )


def test_model_graph_parameters_are_read_only_copies():
    layers = lm.qkv_layers("av_first", 4, 2, 3)
    params = lm.init_params(layers, 0)
    model = lm.ModelGraph(layers, params)
    params["out.b"][0, 0] = 5.0
    assert model.param("out.b")[0, 0] == 0.0
    with pytest.raises(ValueError):
        model.param("out.W")[0, 0] = 1.0


def test_init_params_seeded_with_zero_biases():
    layers = lm.encoder_layers(8, 6, 3, 2, 8, 8)
    a = lm.init_params(layers, 3)
    b = lm.init_params(layers, 3)
    c = lm.init_params(layers, 4)
    for name in a:
        np.testing.assert_array_equal(a[name], b[name])
    assert not np.array_equal(a["attn1.W_Q"], c["attn1.W_Q"])
    assert np.all(a["ffn1.b1"] == 0.0)
    assert np.all(a["out.b"] == 0.0)
    bound = 1.0 / np.sqrt(8)
    assert np.all(np.abs(a["ffn1.W1"]) <= bound)


def test_qkv_pair_is_functionally_identical():
    av_first, kv_first = small_qkv_pair()
    assert av_first.num_features == 16
    assert av_first.feature_kind == "pixel"
    rng = make_rng()
    for _ in range(20):
        x = random_image(rng)
        a = lm.forward(av_first, x)
        b = lm.forward(kv_first, x)
        assert a.logits.shape == (qkv_num_classes,)
        assert_close(a.logits, b.logits, rtol=1e-12, atol=1e-14)
        lm.check_trace(a)
        lm.check_trace(b)
        assert "Z" in a.records[1].cache
        assert "S" in b.records[1].cache
        assert "Z" not in b.records[1].cache


def test_regroup_and_architecture():
    av_first, kv_first = small_qkv_pair()
    assert lm.regroup(av_first, "kv_first").layers == kv_first.layers
    assert_models_equal(lm.regroup(kv_first, "av_first"), av_first)
    rebuilt = lm.ModelGraph.from_architecture(av_first.architecture(), av_first.params)
    assert_models_equal(rebuilt, av_first)


def test_forward_rejects_wrong_input():
    av_first, _ = small_qkv_pair()
    with pytest.raises(ShapeError):
        lm.forward(av_first, np.zeros(15))
    with pytest.raises(TypeError):
        lm.forward(lm.ScalarChain("left"), [1.0, 2.0, 3.0])
    model = small_encoder()
    with pytest.raises(ValueError):
        lm.forward(model, np.full(encoder_seq_len, 99))
    with pytest.raises(ShapeError):
        lm.forward(model, random_tokens(make_rng()), keep=np.ones(3, dtype=bool))


def test_encoder_forward():
    model = small_encoder()
    assert model.feature_kind == "token"
    assert model.num_features == encoder_seq_len
    assert [s.get("index") for s in model.attention_layers()] == [1, 2]
    rng = make_rng()
    trace = lm.forward(model, random_tokens(rng))
    assert trace.logits.shape == (encoder_num_classes,)
    assert trace.embedded.shape == (encoder_seq_len, encoder_d_model)
    for rec in trace.attention_records():
        assert_close(rec.cache["A"].sum(axis=1), np.ones(encoder_seq_len))
    lm.check_trace(trace)


def test_check_trace_detects_tampering():
    model = small_encoder()
    trace = lm.forward(model, random_tokens(make_rng()))
    trace.attention_records()[0].cache["O"] = trace.attention_records()[0].cache["O"] + 1.0
    with pytest.raises(ValueError):
        lm.check_trace(trace)


def test_keep_mask_removes_tokens():
    model = small_encoder()
    rng = make_rng()
    x = random_tokens(rng)
    full = lm.forward(model, x)
    kept = lm.forward(model, x, keep=np.ones(encoder_seq_len, dtype=bool))
    assert_close(kept.logits, full.logits, rtol=1e-12)
    keep = np.ones(encoder_seq_len, dtype=bool)
    keep[2] = False
    masked = lm.forward(model, x, keep=keep)
    for rec in masked.attention_records():
        assert np.all(rec.cache["A"][:, 2] == 0.0)
    # The pooled representation only averages kept positions.
    pool = [r for r in masked.records if r.spec.kind == "mean_pool"][0]
    assert_close(pool.output, pool.input[keep].mean(axis=0, keepdims=True))


def test_pre_embedded_matches_token_input():
    model = small_encoder()
    x = random_tokens(make_rng())
    rows = lm.embed(model, x)
    assert_close(
        lm.logits(model, rows, pre_embedded=True),
        lm.logits(model, x),
        rtol=1e-12,
        atol=1e-14,
    )
    with pytest.raises(ValueError):
        lm.embed(lm.build_linear([np.eye(2)]), [1.0, 2.0])


def test_build_linear():
    model = lm.build_linear([np.array([[1.0], [2.0], [3.0]])], [np.array([0.5])])
    assert model.feature_kind == "vector"
    assert model.num_features == 3
    assert_close(lm.logits(model, [1.0, 1.0, 1.0]), [6.5])


def test_scalar_chain():
    for order, h in (("left", 6.0), ("right", 12.0)):
        trace = lm.scalar_chain(order, 2.0, 3.0, 4.0)
        assert trace.h == h
        assert trace.y == 24.0
        assert list(trace.logits) == [24.0]
    with pytest.raises(ValueError):
        lm.ScalarChain("middle")
    with pytest.raises(ShapeError):
        lm.ScalarChain("left").forward([1.0, 2.0])
    with pytest.raises(ValueError):
        lm.ScalarChain("left").forward([1.0, np.inf, 2.0])
