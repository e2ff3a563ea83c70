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

"""Module of the explainers.

Each explainer returns an :py:class:`Attribution`, one score per input
feature (pixel, token, vector entry or scalar input).

* :py:func:`loo` removes one feature at a time. Pixels and vector
  entries are set to zero. Tokens are masked out of every attention row
  and out of the pooling.
* :py:func:`integrated_gradients` integrates the gradient along the
  straight path from a baseline (zero by default) with the midpoint
  rule. Tokens are interpolated in embedding space.
* :py:func:`rollout` multiplies the attention matrices of all layers.
* :py:func:`attn_lrp` and :py:func:`cp_lrp` propagate relevance with the
  rules of :py:mod:`lrplab.relprop`, and :py:func:`ablation_configs`
  builds the mixed configurations in between.

"""

import logging
import math
import sys
import warnings
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from . import autodiff, relprop
from . import model as _model
from .model import ModelGraph, ScalarChain
from .relprop import RuleConfig

if sys.version_info >= (3, 8):
    from typing import Literal

    AblationFamily = Literal["front_to_back", "back_to_front", "single"]
else:
    AblationFamily = str

logger = logging.getLogger(__name__)

Model = Union[ModelGraph, ScalarChain]

ABLATION_FAMILIES = ("front_to_back", "back_to_front", "single")

#: Display names of the explainers.
METHOD_LABELS: Dict[str, str] = {
    "loo": "LOO",
    "ig": "IG",
    "rollout": "Rollout",
    "attnlrp": "AttnLRP",
    "cplrp": "CP-LRP",
    "random": "Random",
    "ablation": "Ablation",
}


class Attribution:
    """Scores of the input features of one example.

    Parameters
    ----------
    scores : array_like
        One score per feature.
    feature_kind : {'pixel', 'token', 'vector', 'scalar'}
        What the features are.
    method : str
        Name of the explainer that produced the scores.
    normalized : bool, optional
        Whether the scores have been rescaled to sum to one.
    digest : str, optional
        Digest of the configuration used.

    Attributes
    ----------
    scores : numpy.ndarray
    feature_kind : str
    method : str
    normalized : bool
    digest : str or None

    """

    def __init__(
        self: "Attribution",
        scores: Any,
        feature_kind: str,
        method: str,
        normalized: bool = False,
        digest: Optional[str] = None,
    ) -> None:
        self.scores = np.asarray(scores, dtype=np.float64).reshape(-1).copy()
        self.feature_kind = feature_kind
        self.method = method
        self.normalized = bool(normalized)
        self.digest = digest

    def __len__(self: "Attribution") -> int:
        return int(self.scores.shape[0])

    def __repr__(self: "Attribution") -> str:
        return (
            f"Attribution(method={self.method!r}, feature_kind="
            f"{self.feature_kind!r}, n={len(self)})"
        )

    def normalized_copy(self: "Attribution") -> "Attribution":
        """Copy rescaled so that the scores sum to one.

        Rescaling needs a positive total. Otherwise the copy keeps the
        raw scores, is not flagged as normalized and a warning is issued.

        """
        total = float(self.scores.sum())
        if total > 0.0:
            return Attribution(
                self.scores / total,
                self.feature_kind,
                self.method,
                True,
                self.digest,
            )
        warnings.warn(
            f"{self.method} scores sum to {total:g}; left unnormalized.",
            RuntimeWarning,
        )
        return Attribution(self.scores, self.feature_kind, self.method, False, self.digest)

    def to_frame(self: "Attribution") -> pd.DataFrame:
        """Table with columns ``index``, ``raw`` and ``normalized``."""
        total = float(self.scores.sum())
        norm = self.scores / total if total > 0.0 else np.full_like(self.scores, np.nan)
        return pd.DataFrame(
            {"index": np.arange(len(self)), "raw": self.scores, "normalized": norm},
        )

    def to_csv(self: "Attribution", path: str) -> None:
        """Write :py:meth:`to_frame` as CSV."""
        self.to_frame().to_csv(path, index=False, float_format="%.12g")

    def as_image(self: "Attribution", shape: Optional[Sequence[int]] = None) -> np.ndarray:
        """Scores of a pixel attribution reshaped into an image.

        Parameters
        ----------
        shape : Sequence of int, optional
            Image shape. Square by default.

        """
        if shape is None:
            side = int(math.isqrt(len(self)))
            if side * side != len(self):
                raise ValueError("scores do not form a square image; give shape.")
            shape = (side, side)
        return self.scores.reshape(tuple(shape))


def feature_kind(model: Model) -> str:
    """What the input features of a model are."""
    return str(model.feature_kind)


def target_logits(model: Model, x: Any, keep: Optional[np.ndarray] = None) -> np.ndarray:
    """Logits of a model with an optional token keep-mask."""
    if isinstance(model, ScalarChain):
        return model.forward(x).logits
    return _model.forward(model, x, keep).logits


def predicted_class(model: Model, x: Any) -> int:
    """Index of the largest logit."""
    return int(np.argmax(target_logits(model, x)))


def score_without(model: Model, x: Any, drop: np.ndarray, target: int) -> float:
    """Target logit after removing the features flagged in `drop`.

    Tokens are masked out of attention and pooling. Every other kind of
    feature is set to zero.

    """
    drop = np.asarray(drop, dtype=bool).reshape(-1)
    if feature_kind(model) == "token":
        return float(target_logits(model, x, ~drop)[target])
    values = np.array(x, dtype=np.float64)
    flat = values.reshape(-1)
    flat[drop] = 0.0
    return float(target_logits(model, flat.reshape(values.shape))[target])


def _resolve_target(model: Model, x: Any, target: Optional[int]) -> int:
    if target is None:
        return predicted_class(model, x)
    return int(target)


def loo(model: Model, x: Any, target: Optional[int] = None) -> Attribution:
    """Leave-one-out scores ``f(x) - f(x without feature i)``.

    Parameters
    ----------
    model : ModelGraph or ScalarChain
    x : array_like
        The example.
    target : int, optional
        Logit to explain. The predicted class by default.

    Returns
    -------
    attribution : Attribution

    """
    target = _resolve_target(model, x, target)
    n = int(model.num_features)
    base = float(target_logits(model, x)[target])
    scores = np.empty(n)
    drop = np.zeros(n, dtype=bool)
    for i in range(n):
        drop[i] = True
        scores[i] = base - score_without(model, x, drop, target)
        drop[i] = False
    return Attribution(scores, feature_kind(model), "loo")


def integrated_gradients(
    model: Model,
    x: Any,
    target: Optional[int] = None,
    baseline: Optional[Any] = None,
    steps: int = 50,
) -> Attribution:
    """Integrated gradients with the midpoint rule.

    ``IG_i = (x_i - x'_i) * mean_k df/dx_i(x' + (k + 1/2)/m (x - x'))``
    for ``k = 0..m-1``. For token models the path runs between embedding
    rows (the baseline defaults to all zero rows) and each token's score
    is the sum over its embedding dimensions.

    Parameters
    ----------
    model : ModelGraph or ScalarChain
    x : array_like
        The example.
    target : int, optional
        Logit to explain. The predicted class by default.
    baseline : array_like, optional
        Same shape as the input (or embedding rows for token models).
        Zero by default.
    steps : int, optional
        Number of midpoints ``m``, at least 8.

    Returns
    -------
    attribution : Attribution

    Raises
    ------
    ValueError
        If `steps` is below 8 or `baseline` has the wrong shape.

    """
    if steps < 8:
        raise ValueError("steps must be at least 8.")
    target = _resolve_target(model, x, target)
    tokens = feature_kind(model) == "token"
    if tokens:
        point = _model.embed(model, x)
    else:
        point = np.asarray(x, dtype=np.float64)
    base = np.zeros_like(point) if baseline is None else np.asarray(baseline, dtype=np.float64)
    if base.shape != point.shape:
        raise ValueError(f"baseline has shape {base.shape}, expected {point.shape}.")
    diff = point - base
    total = np.zeros_like(point)
    for k in range(steps):
        alpha = (k + 0.5) / steps
        where = base + alpha * diff
        if isinstance(model, ScalarChain):
            trace: Any = model.forward(where)
        else:
            trace = _model.forward(model, where, pre_embedded=tokens)
        total += np.asarray(autodiff.backward(trace, target).d_input).reshape(point.shape)
    ig = diff * (total / steps)
    scores = ig.sum(axis=1) if tokens else ig.reshape(-1)
    return Attribution(scores, feature_kind(model), "ig")


def rollout_matrices(
    attentions: Sequence[np.ndarray],
    residual: bool = False,
    readout: Optional[Union[int, np.ndarray]] = None,
) -> np.ndarray:
    """Roll out a stack of attention matrices.

    ``R = A_L ... A_2 A_1``, each ``A`` optionally replaced by
    ``(A + I) / 2`` with its rows renormalized.

    Parameters
    ----------
    attentions : Sequence of numpy.ndarray
        ``T x T`` attention matrices, first layer first.
    residual : bool, optional
        Whether to account for residual connections.
    readout : int or numpy.ndarray of bool or None, optional
        Which rows of ``R`` make the score: a single position, the mean
        over the flagged positions, or the mean over all rows (``None``,
        the readout of a mean pooled model).

    Returns
    -------
    scores : numpy.ndarray
        One score per position.

    """
    if len(attentions) == 0:
        raise ValueError("need at least one attention matrix.")
    n = attentions[0].shape[0]
    eye = np.eye(n)
    R = eye
    for A in attentions:
        A = np.asarray(A, dtype=np.float64)
        if residual:
            A = 0.5 * (A + eye)
            sums = A.sum(axis=1, keepdims=True)
            A = np.divide(A, sums, out=np.zeros_like(A), where=sums > 0)
        R = A @ R
    if readout is None:
        return R.mean(axis=0)
    if isinstance(readout, (int, np.integer)):
        return R[int(readout)].copy()
    rows = np.asarray(readout, dtype=bool)
    if not rows.any():
        return np.zeros(n)
    return R[rows].mean(axis=0)


def rollout(
    model: ModelGraph,
    x: Any,
    residual: bool = False,
    keep: Optional[np.ndarray] = None,
) -> Attribution:
    """Attention rollout read out through the model's mean pooling.

    Raises
    ------
    ValueError
        If the model has no softmax attention layer.

    """
    trace = _model.forward(model, x, keep)
    attentions = [
        r.cache["A"] for r in trace.attention_records() if r.spec.kind == "softmax_attention"
    ]
    if not attentions:
        raise ValueError("rollout needs at least one softmax attention layer.")
    readout = None if trace.keep is None else trace.keep
    scores = rollout_matrices(attentions, residual, readout)
    return Attribution(scores, feature_kind(model), "rollout")


def _trace(model: Model, x: Any) -> Any:
    if isinstance(model, ScalarChain):
        return model.forward(x)
    return _model.forward(model, x)


def _n_attention(model: Model) -> int:
    if isinstance(model, ScalarChain):
        return 0
    return len(model.attention_layers())


def attn_lrp(
    model: Model,
    x: Any,
    target: Optional[int] = None,
    cfg: Optional[RuleConfig] = None,
) -> Attribution:
    """Relevance propagation with a configurable rule per attention layer.

    With the default `cfg` every attention layer gets the full bilinear
    and softmax treatment with ``epsilon=1e-6``.

    """
    target = _resolve_target(model, x, target)
    if cfg is None:
        cfg = relprop.uniform_rules(_n_attention(model), "attnlrp")
    rmap = relprop.propagate(_trace(model, x), target, cfg)
    rules = set(cfg.attn_rules.values())
    method = "cplrp" if rules == {"cplrp"} else "attnlrp" if rules <= {"attnlrp"} else "ablation"
    return Attribution(rmap.input_relevance, feature_kind(model), method)


def cp_lrp(
    model: Model,
    x: Any,
    target: Optional[int] = None,
    epsilon: float = 1e-6,
) -> Attribution:
    """Relevance propagation with attention weights held constant everywhere."""
    cfg = relprop.uniform_rules(_n_attention(model), "cplrp", epsilon)
    return attn_lrp(model, x, target, cfg)


class AblationPlan:
    """Which attention layers bypass the softmax during propagation.

    Parameters
    ----------
    family : {'front_to_back', 'back_to_front', 'single'}
        ``'front_to_back'`` switches layers ``1..k`` to the value-only
        rule, ``'back_to_front'`` layers ``k..L`` and ``'single'`` only
        layer ``k``.
    k : int
        Layer count or index.
    n_layers : int
        Number of attention layers ``L``.

    Raises
    ------
    ValueError
        If `family` is unknown or `k` is not in ``1..L``.

    """

    def __init__(self: "AblationPlan", family: AblationFamily, k: int, n_layers: int) -> None:
        if family not in ABLATION_FAMILIES:
            raise ValueError(f"Unknown ablation family {family!r}.")
        if n_layers < 1:
            raise ValueError("n_layers must be positive.")
        if not 1 <= k <= n_layers:
            raise ValueError(f"k must be in 1..{n_layers}, got {k}.")
        self._family = str(family)
        self._k = int(k)
        self._n_layers = int(n_layers)

    @property
    def family(self: "AblationPlan") -> str:
        """str: The ablation family."""
        return self._family

    @property
    def k(self: "AblationPlan") -> int:
        """int: Layer count or index."""
        return self._k

    @property
    def n_layers(self: "AblationPlan") -> int:
        """int: Number of attention layers."""
        return self._n_layers

    def bypassed(self: "AblationPlan") -> List[int]:
        """Indices of the layers that use the value-only rule."""
        if self._family == "front_to_back":
            return list(range(1, self._k + 1))
        if self._family == "back_to_front":
            return list(range(self._k, self._n_layers + 1))
        return [self._k]

    @property
    def label(self: "AblationPlan") -> str:
        """str: The bypassed layers, e.g. ``'1-3'`` or ``'4'``."""
        layers = self.bypassed()
        if len(layers) == 1:
            return str(layers[0])
        return f"{layers[0]}-{layers[-1]}"

    def to_dict(self: "AblationPlan") -> Dict[str, Any]:
        """JSON-ready description."""
        return {"family": self._family, "k": self._k, "n_layers": self._n_layers}

    @classmethod
    def from_dict(cls: "type[AblationPlan]", d: Mapping[str, Any]) -> "AblationPlan":
        """Inverse of :py:meth:`to_dict`."""
        return cls(d["family"], int(d["k"]), int(d["n_layers"]))

    def __eq__(self: "AblationPlan", other: object) -> bool:
        return isinstance(other, AblationPlan) and self.to_dict() == other.to_dict()

    def __hash__(self: "AblationPlan") -> int:
        return hash((self._family, self._k, self._n_layers))

    def __repr__(self: "AblationPlan") -> str:
        return f"AblationPlan({self._family!r}, {self._k}, {self._n_layers})"


def ablation_configs(
    plan: AblationPlan,
    n_layers: Optional[int] = None,
    epsilon: float = 1e-6,
) -> RuleConfig:
    """The rule configuration of an ablation plan.

    Parameters
    ----------
    plan : AblationPlan
    n_layers : int, optional
        Number of attention layers of the model, checked against the
        plan when given.
    epsilon : float, optional
        Stabilizer.

    Returns
    -------
    cfg : RuleConfig

    """
    if n_layers is not None and n_layers != plan.n_layers:
        raise ValueError(
            f"The plan is for {plan.n_layers} layers, the model has {n_layers}.",
        )
    bypassed = set(plan.bypassed())
    rules = {
        i: ("cplrp" if i in bypassed else "attnlrp") for i in range(1, plan.n_layers + 1)
    }
    return RuleConfig(rules, epsilon)


def all_plans(n_layers: int) -> List[AblationPlan]:
    """Every plan of the three families, family by family, k ascending."""
    return [
        AblationPlan(family, k, n_layers)
        for family in ABLATION_FAMILIES
        for k in range(1, n_layers + 1)
    ]


def random_attribution(n: int, seed: int, kind: str = "pixel") -> Attribution:
    """Uniformly random scores, the reference for metric sanity checks."""
    rng = np.random.default_rng(seed)
    return Attribution(rng.random(n), kind, "random")


def explain(
    method: str,
    model: Model,
    x: Any,
    target: Optional[int] = None,
    settings: Optional[Mapping[str, Any]] = None,
) -> Attribution:
    """Run an explainer by name.

    Parameters
    ----------
    method : str
        One of ``'loo'``, ``'ig'``, ``'rollout'``, ``'attnlrp'``,
        ``'cplrp'``, ``'random'`` and ``'ablation'``.
    model : ModelGraph or ScalarChain
    x : array_like
        The example.
    target : int, optional
        Logit to explain. The predicted class by default.
    settings : Mapping, optional
        ``epsilon`` (1e-6), ``ig_steps`` (50), ``ig_baseline`` (array or
        ``None``), ``rollout_residual`` (False), ``seed`` (0, for
        ``'random'``), ``plan`` (an :py:class:`AblationPlan`, required for
        ``'ablation'``) and ``digest``.

    Returns
    -------
    attribution : Attribution

    Raises
    ------
    ValueError
        If `method` is unknown or ``'ablation'`` is asked for without a
        plan.

    """
    s = dict(settings or {})
    eps = float(s.get("epsilon", 1e-6))
    if method == "loo":
        att = loo(model, x, target)
    elif method == "ig":
        att = integrated_gradients(
            model,
            x,
            target,
            s.get("ig_baseline"),
            int(s.get("ig_steps", 50)),
        )
    elif method == "rollout":
        if not isinstance(model, ModelGraph):
            raise ValueError("rollout needs a model with attention layers.")
        att = rollout(model, x, bool(s.get("rollout_residual", False)))
    elif method == "attnlrp":
        att = attn_lrp(model, x, target, relprop.uniform_rules(_n_attention(model), "attnlrp", eps))
    elif method == "cplrp":
        att = cp_lrp(model, x, target, eps)
    elif method == "random":
        att = random_attribution(int(model.num_features), int(s.get("seed", 0)), feature_kind(model))
    elif method == "ablation":
        plan = s.get("plan")
        if not isinstance(plan, AblationPlan):
            raise ValueError("method 'ablation' needs settings['plan'].")
        att = attn_lrp(model, x, target, ablation_configs(plan, _n_attention(model), eps))
        att.method = f"ablation:{plan.family}:{plan.k}"
    else:
        raise ValueError(f"Unknown method {method!r}.")
    att.digest = s.get("digest")
    logger.debug("%s attribution over %d features", method, len(att))
    return att
