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

import importlib
import warnings

import numpy as np
import pytest
from asserts import assert_close, assert_close_to_scale, assert_conserved
from make_randoms import (
    make_rng,
    random_image,
    random_linear,
    random_tokens,
    small_encoder,
    small_qkv_pair,
)

from lrplab import relprop, tensor
from lrplab import model as lm
from lrplab.exceptions import PropagationError

explain = importlib.import_module("lrplab.explain")


def propagate(model, x, target, rule="attnlrp", epsilon=1e-9):
    cfg = relprop.uniform_rules(len(model.attention_layers()), rule, epsilon)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return relprop.propagate(lm.forward(model, x), target, cfg)


def test_scalar_chain_counterexample():
    cfg = relprop.RuleConfig(epsilon=1e-12)
    left = relprop.propagate(lm.scalar_chain("left", 2.0, 3.0, 4.0), 0, cfg)
    right = relprop.propagate(lm.scalar_chain("right", 2.0, 3.0, 4.0), 0, cfg)
    assert_close(left.input_relevance, [6.0, 6.0, 12.0], rtol=0.0, atol=1e-9)
    assert_close(right.input_relevance, [12.0, 6.0, 6.0], rtol=0.0, atol=1e-9)
    assert left.seed == 24.0


def test_scalar_chain_unit_inputs_mirror_each_other():
    cfg = relprop.RuleConfig(epsilon=1e-12)
    left = relprop.propagate(lm.scalar_chain("left", 1.0, 1.0, 1.0), 0, cfg)
    right = relprop.propagate(lm.scalar_chain("right", 1.0, 1.0, 1.0), 0, cfg)
    assert_close(left.input_relevance, right.input_relevance[::-1], rtol=0.0, atol=1e-9)
    assert_close(left.input_relevance, [0.25, 0.25, 0.5], rtol=0.0, atol=1e-9)


def test_bilinear_half_split():
    # Relevance arriving at a product is proportional to its value, as it
    # is inside a network.
    rng = make_rng()
    for _ in range(1000):
        n, k, m = rng.integers(1, 6, size=3)
        X = rng.normal(size=(n, k))
        Y = rng.normal(size=(k, m))
        R_C = (X @ Y) * rng.uniform(0.1, 2.0, size=(n, m))
        R_X, R_Y = relprop.bilinear_matmul(R_C, X, Y, 1e-9)
        assert R_X.shape == X.shape
        assert R_Y.shape == Y.shape
        # Each entry leaks at most a multiple of epsilon.
        bound = 1e-6 * np.abs(R_C).sum() + 1e-9 * R_C.size
        assert abs(R_X.sum() - 0.5 * R_C.sum()) <= bound
        assert abs(R_Y.sum() - 0.5 * R_C.sum()) <= bound


def test_bilinear_qk_half_split():
    rng = make_rng()
    Q = rng.normal(size=(5, 3))
    K = rng.normal(size=(5, 3))
    Z = Q @ K.T / np.sqrt(3)
    R_Z = Z * rng.uniform(0.1, 2.0, size=Z.shape)
    R_Q, R_K = relprop.bilinear_qk(R_Z, Q, K, 3, 1e-9)
    assert R_K.shape == K.shape
    total = np.abs(R_Z).sum()
    assert abs(R_Q.sum() - 0.5 * R_Z.sum()) <= 1e-6 * total
    assert abs(R_K.sum() - 0.5 * R_Z.sum()) <= 1e-6 * total


def test_softmax_rule():
    Z = np.array([[1.0, 2.0]])
    A = tensor.softmax_rows(Z)
    R_Z = relprop.softmax_rule(np.array([[1.0, 0.0]]), Z, A)
    assert_close(R_Z, [[1.0 - A[0, 0], -2.0 * A[0, 1]]])
    # Uniform logits give no relevance to any of them.
    flat = np.zeros((1, 3))
    assert np.all(relprop.softmax_rule(np.ones((1, 3)), flat, tensor.softmax_rows(flat)) == 0.0)


def test_cp_value_only():
    rng = make_rng()
    A = tensor.softmax_rows(rng.normal(size=(4, 4)))
    V = rng.normal(size=(4, 2))
    R_O = (A @ V) * rng.uniform(0.1, 2.0, size=(4, 2))
    R_A, R_V = relprop.cp_value_only(R_O, A, V, 1e-9)
    assert np.all(R_A == 0.0)
    assert abs(R_V.sum() - R_O.sum()) <= 1e-6 * np.abs(R_O).sum()


def test_epsilon_linear_single_layer():
    x = np.array([[1.0, 2.0]])
    W = np.array([[3.0], [-1.0]])
    R = relprop.epsilon_linear(np.array([[1.0]]), x, W, 1e-12)
    assert_close(R, [[3.0, -2.0]], rtol=1e-9)
    # A bias takes its share: z = 1 + 1, half of the relevance goes to it.
    R_b = relprop.epsilon_linear(np.array([[1.0]]), x, W, 1e-12, np.array([[1.0]]))
    assert_close(R_b, [[1.5, -1.0]], rtol=1e-9)


def test_linear_network_relevance_equals_loo():
    rng = make_rng()
    for _ in range(20):
        model = random_linear(rng, widths=(6, 5, 4, 3))
        x = rng.normal(size=6)
        for target in range(3):
            cfg = relprop.RuleConfig(epsilon=1e-12)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                rmap = relprop.propagate(lm.forward(model, x), target, cfg)
            loo = explain.loo(model, x, target).scores
            assert_close_to_scale(rmap.input_relevance, loo, 1e-8)


def test_linear_network_bias_absorption():
    rng = make_rng()
    model = random_linear(rng, widths=(4, 3), bias=True)
    x = rng.normal(size=4)
    rmap = propagate(model, x, 0)
    assert rmap.absorbed != 0.0
    assert rmap.seed == pytest.approx(rmap.input_relevance.sum() + rmap.absorbed, rel=1e-6)


def test_linear_attention_groupings_split_differently():
    av_first, kv_first = small_qkv_pair()
    rng = make_rng()
    for _ in range(5):
        x = random_image(rng)
        target = explain.predicted_class(av_first, x)
        a = propagate(av_first, x, target)
        b = propagate(kv_first, x, target)
        total = np.abs(a["attn1.O"]).sum()
        # (Q K^T) V gives V half of the output relevance, Q (K^T V) a quarter.
        assert abs(a["attn1.V"].sum() - 0.5 * a["attn1.O"].sum()) <= 1e-6 * total
        assert abs(b["attn1.V"].sum() - 0.25 * b["attn1.O"].sum()) <= 1e-6 * total
        assert abs(b["attn1.Q"].sum() - 0.5 * b["attn1.O"].sum()) <= 1e-6 * total
        assert abs(a["attn1.Q"].sum() - 0.25 * a["attn1.O"].sum()) <= 1e-6 * total
        diff = np.max(np.abs(a.input_relevance - b.input_relevance))
        assert diff > 1e-3 * np.max(np.abs(a.input_relevance))
        # Holding the attention constant removes the difference.
        cp_a = propagate(av_first, x, target, "cplrp")
        cp_b = propagate(kv_first, x, target, "cplrp")
        assert_close_to_scale(cp_a.input_relevance, cp_b.input_relevance, 1e-9)


def test_value_only_rule_is_grouping_invariant():
    av_first, kv_first = small_qkv_pair()
    rng = make_rng()
    for _ in range(5):
        x = random_image(rng)
        target = explain.predicted_class(av_first, x)
        a = propagate(av_first, x, target, "cplrp", 1e-6)
        b = propagate(kv_first, x, target, "cplrp", 1e-6)
        assert_close_to_scale(a.input_relevance, b.input_relevance, 1e-9)
        assert np.all(a["attn1.Q"] == 0.0)
        assert np.all(b["attn1.K"] == 0.0)


@pytest.mark.parametrize("rule", ["attnlrp", "cplrp"])
def test_encoder_conservation(rule):
    model = small_encoder()
    rng = make_rng()
    for _ in range(100):
        x = random_tokens(rng)
        rmap = propagate(model, x, explain.predicted_class(model, x), rule)
        assert_conserved(rmap, 1e-6)


@pytest.mark.parametrize("which", [0, 1])
def test_linear_attention_conservation(which):
    model = small_qkv_pair()[which]
    rng = make_rng()
    for _ in range(10):
        x = random_image(rng)
        rmap = propagate(model, x, 0)
        assert_conserved(rmap, 1e-6)
        # Nothing but the classifier bias absorbs relevance here.
        scale = max(e.upper_abs for e in rmap.audit)
        total = rmap.input_relevance.sum() + rmap.absorbed
        assert abs(rmap.seed - total) <= 1e-5 * scale


def test_relevance_map_nodes_and_audit():
    model = small_encoder()
    x = random_tokens(make_rng())
    rmap = propagate(model, x, 0)
    for name in (
        "out.out",
        "pool.out",
        "attn2.O",
        "attn1.A",
        "attn1.Z",
        "attn1.Q",
        "attn1.K",
        "attn1.V",
        "embed.out",
        "input",
    ):
        assert name in rmap
    assert rmap["attn1.A"].shape == (6, 6)
    # Token relevance is the sum over each embedding row.
    assert_close(rmap.input_relevance, rmap["embed.out"].sum(axis=1))
    frame = rmap.audit_frame()
    assert list(frame.columns) == ["node", "rule", "upper", "lower", "absorbed", "leak"]
    assert len(frame) == len(rmap.audit)
    assert {"epsilon", "bilinear", "softmax", "residual", "identity"} <= set(frame["rule"])


def test_negative_logit_warns_and_flips_signs():
    model = lm.build_linear([np.array([[-1.0], [-2.0]])])
    with pytest.warns(RuntimeWarning, match="raw target logit"):
        rmap = relprop.propagate(lm.forward(model, [1.0, 1.0]), 0)
    assert rmap.seed == -3.0
    assert_close(rmap.input_relevance, [-1.0, -2.0], rtol=1e-6)


def test_missing_rule_is_rejected():
    model = small_encoder()
    trace = lm.forward(model, random_tokens(make_rng()))
    with pytest.raises(PropagationError):
        relprop.propagate(trace, 0, relprop.RuleConfig({1: "attnlrp"}))
    with pytest.raises(ValueError):
        relprop.propagate(trace, 5)
    with pytest.raises(TypeError):
        relprop.propagate(trace, "0")


def test_rule_config():
    cfg = relprop.RuleConfig({2: "cplrp", 1: "attnlrp"}, 1e-8)
    assert list(cfg.attn_rules) == [1, 2]
    assert cfg.rule_for(2) == "cplrp"
    assert relprop.RuleConfig.from_dict(cfg.to_dict()) == cfg
    assert hash(relprop.RuleConfig.from_dict(cfg.to_dict())) == hash(cfg)
    with pytest.raises(PropagationError):
        cfg.rule_for(3)
    for bad in ({0: "attnlrp"}, {1: "gradient"}):
        with pytest.raises(ValueError):
            relprop.RuleConfig(bad)
    with pytest.raises(ValueError):
        relprop.RuleConfig(epsilon=0.0)
    assert relprop.uniform_rules(3, "cplrp").attn_rules == {1: "cplrp", 2: "cplrp", 3: "cplrp"}
