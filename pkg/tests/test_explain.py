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

import numpy as np
import numpy.testing as npt
import pandas as pd
import pytest
from asserts import assert_close, assert_close_to_scale
from make_randoms import (
    encoder_seq_len,
    make_rng,
    random_image,
    random_tokens,
    small_encoder,
    small_qkv_pair,
)

from lrplab import model as lm
from lrplab import relprop

ex = importlib.import_module("lrplab.explain")


def test_loo_scalar_chain():
    for order in ("left", "right"):
        att = ex.loo(lm.ScalarChain(order), [2.0, 3.0, 4.0])
        assert att.method == "loo"
        assert att.feature_kind == "scalar"
        assert_close(att.scores, [24.0, 24.0, 24.0], rtol=0.0)


def test_ig_scalar_chain():
    # Each input gets a third of the product, up to the midpoint rule.
    att = ex.integrated_gradients(lm.ScalarChain("left"), [2.0, 3.0, 4.0], steps=50)
    assert_close(att.scores, [8.0, 8.0, 8.0], rtol=1e-3)


def test_ig_completeness():
    # The linear attention network is cubic in its pixels plus a bias, so
    # the midpoint rule sums to the logit change almost exactly.
    av_first, _ = small_qkv_pair()
    rng = make_rng()
    for _ in range(5):
        x = random_image(rng)
        target = ex.predicted_class(av_first, x)
        att = ex.integrated_gradients(av_first, x, target, steps=50)
        change = ex.target_logits(av_first, x)[target] - ex.target_logits(av_first, np.zeros_like(x))[target]
        assert abs(att.scores.sum() - change) <= 1e-3 * abs(change) + 1e-12


def test_ig_arguments():
    model = lm.ScalarChain("left")
    with pytest.raises(ValueError):
        ex.integrated_gradients(model, [1.0, 2.0, 3.0], steps=7)
    with pytest.raises(ValueError):
        ex.integrated_gradients(model, [1.0, 2.0, 3.0], baseline=[0.0, 0.0])
    # A baseline equal to the input gives no attribution.
    att = ex.integrated_gradients(model, [1.0, 2.0, 3.0], baseline=[1.0, 2.0, 3.0], steps=8)
    assert np.all(att.scores == 0.0)


def test_ig_tokens():
    model = small_encoder()
    x = random_tokens(make_rng())
    att = ex.integrated_gradients(model, x, steps=8)
    assert att.feature_kind == "token"
    assert att.scores.shape == (encoder_seq_len,)
    assert np.all(np.isfinite(att.scores))


@pytest.mark.parametrize("method", ["loo", "ig"])
def test_model_agnostic_methods_ignore_grouping(method):
    av_first, kv_first = small_qkv_pair()
    rng = make_rng()
    for _ in range(3):
        x = random_image(rng)
        settings = {"ig_steps": 16}
        a = ex.explain(method, av_first, x, settings=settings)
        b = ex.explain(method, kv_first, x, settings=settings)
        assert_close_to_scale(a.scores, b.scores, 1e-9)


def test_loo_tokens_masks_positions():
    model = small_encoder()
    x = random_tokens(make_rng())
    target = ex.predicted_class(model, x)
    att = ex.loo(model, x, target)
    assert att.scores.shape == (encoder_seq_len,)
    keep = np.ones(encoder_seq_len, dtype=bool)
    keep[2] = False
    expected = lm.logits(model, x)[target] - lm.logits(model, x, keep)[target]
    assert att.scores[2] == pytest.approx(expected, rel=1e-12)


def test_rollout_matrices():
    A1 = np.array([[1.0, 0.0], [0.5, 0.5]])
    A2 = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert_close(ex.rollout_matrices([A1]), [0.75, 0.25])
    assert_close(ex.rollout_matrices([A1], readout=1), [0.5, 0.5])
    assert_close(ex.rollout_matrices([A1], readout=np.array([True, False])), [1.0, 0.0])
    assert_close(ex.rollout_matrices([A1], residual=True, readout=1), [0.25, 0.75])
    assert_close(ex.rollout_matrices([A1, A2], readout=0), [0.5, 0.5])
    assert_close(ex.rollout_matrices([A1], readout=np.zeros(2, dtype=bool)), [0.0, 0.0])
    with pytest.raises(ValueError):
        ex.rollout_matrices([])


def test_rollout_models():
    model = small_encoder()
    att = ex.rollout(model, random_tokens(make_rng()))
    assert att.method == "rollout"
    assert att.scores.sum() == pytest.approx(1.0)
    assert np.all(att.scores >= 0.0)
    av_first, _ = small_qkv_pair()
    with pytest.raises(ValueError):
        ex.rollout(av_first, random_image(make_rng()))
    with pytest.raises(ValueError):
        ex.explain("rollout", lm.ScalarChain("left"), [1.0, 2.0, 3.0])


def test_attribution_normalization():
    att = ex.Attribution([1.0, 3.0], "pixel", "loo")
    norm = att.normalized_copy()
    assert norm.normalized
    assert not att.normalized
    assert_close(norm.scores, [0.25, 0.75])
    with pytest.warns(RuntimeWarning):
        flat = ex.Attribution([1.0, -1.0], "pixel", "ig").normalized_copy()
    assert not flat.normalized
    assert_close(flat.scores, [1.0, -1.0])


def test_attribution_tables(tmp_path):
    att = ex.Attribution([1.0, 3.0, 0.0, 4.0], "pixel", "cplrp")
    frame = att.to_frame()
    assert list(frame.columns) == ["index", "raw", "normalized"]
    assert_close(frame["normalized"], [0.125, 0.375, 0.0, 0.5])
    path = tmp_path / "att.csv"
    att.to_csv(str(path))
    back = pd.read_csv(path)
    assert_close(back["raw"], att.scores)
    assert ex.Attribution([1.0, -1.0], "pixel", "ig").to_frame()["normalized"].isna().all()
    npt.assert_array_equal(att.as_image(), [[1.0, 3.0], [0.0, 4.0]])
    assert att.as_image((1, 4)).shape == (1, 4)
    with pytest.raises(ValueError):
        ex.Attribution(np.ones(5), "pixel", "loo").as_image()
    assert len(att) == 4


def test_ablation_plan():
    plan = ex.AblationPlan("front_to_back", 2, 4)
    assert plan.bypassed() == [1, 2]
    assert plan.label == "1-2"
    plan = ex.AblationPlan("back_to_front", 3, 4)
    assert plan.bypassed() == [3, 4]
    assert plan.label == "3-4"
    assert ex.AblationPlan("back_to_front", 4, 4).label == "4"
    assert ex.AblationPlan("single", 2, 4).bypassed() == [2]
    assert ex.AblationPlan.from_dict(plan.to_dict()) == plan
    for args in (("sideways", 1, 2), ("single", 0, 2), ("single", 3, 2), ("single", 1, 0)):
        with pytest.raises(ValueError):
            ex.AblationPlan(*args)


def test_ablation_configs():
    cfg = ex.ablation_configs(ex.AblationPlan("single", 2, 3), epsilon=1e-8)
    assert cfg.attn_rules == {1: "attnlrp", 2: "cplrp", 3: "attnlrp"}
    assert cfg.epsilon == 1e-8
    with pytest.raises(ValueError):
        ex.ablation_configs(ex.AblationPlan("single", 1, 3), n_layers=2)
    plans = ex.all_plans(3)
    assert len(plans) == 9
    assert [p.family for p in plans[:3]] == ["front_to_back"] * 3
    assert [p.k for p in plans[3:6]] == [1, 2, 3]


def test_full_ablation_matches_value_only_rule():
    model = small_encoder()
    x = random_tokens(make_rng())
    n = len(model.attention_layers())
    plan = ex.AblationPlan("front_to_back", n, n)
    ablated = ex.explain("ablation", model, x, settings={"plan": plan})
    assert ablated.method == f"ablation:front_to_back:{n}"
    npt.assert_array_equal(ablated.scores, ex.cp_lrp(model, x).scores)
    # With a single layer the families coincide.
    one = small_encoder(n_layers=1)
    a = ex.explain("ablation", one, x, settings={"plan": ex.AblationPlan("single", 1, 1)})
    b = ex.explain("ablation", one, x, settings={"plan": ex.AblationPlan("front_to_back", 1, 1)})
    npt.assert_array_equal(a.scores, b.scores)


def test_attn_lrp_method_names():
    model = small_encoder()
    x = random_tokens(make_rng())
    assert ex.attn_lrp(model, x).method == "attnlrp"
    assert ex.cp_lrp(model, x).method == "cplrp"
    mixed = relprop.RuleConfig({1: "cplrp", 2: "attnlrp"})
    assert ex.attn_lrp(model, x, cfg=mixed).method == "ablation"


def test_explain_dispatch():
    model = small_encoder()
    x = random_tokens(make_rng())
    for method in ("loo", "ig", "rollout", "attnlrp", "cplrp", "random"):
        att = ex.explain(method, model, x, settings={"ig_steps": 8, "digest": "abc"})
        assert att.method == method
        assert att.digest == "abc"
        assert att.scores.shape == (encoder_seq_len,)
    a = ex.explain("random", model, x, settings={"seed": 3})
    b = ex.explain("random", model, x, settings={"seed": 3})
    npt.assert_array_equal(a.scores, b.scores)
    npt.assert_array_equal(
        ex.explain("attnlrp", model, x, settings={"epsilon": 1e-6}).scores,
        ex.attn_lrp(model, x).scores,
    )
    with pytest.raises(ValueError):
        ex.explain("saliency", model, x)
    with pytest.raises(ValueError):
        ex.explain("ablation", model, x)
