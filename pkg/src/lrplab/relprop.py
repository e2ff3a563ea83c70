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

"""Module for layer-wise relevance propagation.

The rules below each take the relevance arriving at the output of one
operation and redistribute it over that operation's inputs. Every
denominator is stabilized as ``z + eps * sign(z)`` with ``sign(0) = +1``.

* :py:func:`epsilon_linear` for linear maps (weights, pooling, sums).
* :py:func:`bilinear_matmul` for products ``C = scale * X @ Y`` in which
  both factors depend on the input. It gives each factor half of the
  relevance, and :py:func:`bilinear_av` and :py:func:`bilinear_qk` are
  its two uses inside attention.
* :py:func:`softmax_rule` for ``A = softmax(Z)``.
* :py:func:`cp_value_only` for ``O = A @ V`` with ``A`` held constant,
  so that everything goes to ``V``.

:py:func:`propagate` walks a :py:class:`lrplab.model.ForwardTrace`
backward and applies them, choosing per attention layer between the
full bilinear treatment (``'attnlrp'``) and the value-only one
(``'cplrp'``) as a :py:class:`RuleConfig` says.

"""

import logging
import math
import sys
import warnings
from typing import Any, Dict, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .exceptions import PropagationError
from .model import ForwardTrace, LayerRecord, ScalarTrace
from .tensor import Matrix, as_matrix, stabilize

if sys.version_info >= (3, 8):
    from typing import Literal

    AttentionRule = Literal["attnlrp", "cplrp"]
else:
    AttentionRule = str

logger = logging.getLogger(__name__)

ATTENTION_RULES = ("attnlrp", "cplrp")


class RuleConfig:
    """Which rules to use when propagating relevance.

    Parameters
    ----------
    attn_rules : Mapping of int to str, optional
        Rule for each attention layer, keyed by its one based index.
        Values are ``'attnlrp'`` or ``'cplrp'``.
    epsilon : float, optional
        Stabilizer of every denominator. Must be positive. Default
        ``1e-6``.

    Raises
    ------
    ValueError
        If `epsilon` is not positive, an index is below one or a rule is
        unknown.

    See Also
    --------
    uniform_rules

    """

    def __init__(
        self: "RuleConfig",
        attn_rules: Optional[Mapping[int, AttentionRule]] = None,
        epsilon: float = 1e-6,
    ) -> None:
        epsilon = float(epsilon)
        if not (epsilon > 0.0 and math.isfinite(epsilon)):
            raise ValueError("epsilon must be positive and finite.")
        rules: Dict[int, str] = {}
        for index, rule in (attn_rules or {}).items():
            if int(index) < 1:
                raise ValueError("attention layer indices start at 1.")
            if rule not in ATTENTION_RULES:
                raise ValueError(f"Unknown attention rule {rule!r}.")
            rules[int(index)] = rule
        self._rules = dict(sorted(rules.items()))
        self._epsilon = epsilon

    @property
    def epsilon(self: "RuleConfig") -> float:
        """float: The stabilizer."""
        return self._epsilon

    @property
    def attn_rules(self: "RuleConfig") -> Dict[int, str]:
        """dict: Rule per attention layer index (a copy)."""
        return dict(self._rules)

    def rule_for(self: "RuleConfig", index: int) -> str:
        """Rule of one attention layer.

        Raises
        ------
        PropagationError
            If the layer has no assignment.

        """
        try:
            return self._rules[index]
        except KeyError:
            raise PropagationError(
                f"No rule is assigned to attention layer {index}.",
            ) from None

    def to_dict(self: "RuleConfig") -> Dict[str, Any]:
        """JSON-ready description."""
        return {
            "epsilon": self._epsilon,
            "attn_rules": {str(k): v for k, v in self._rules.items()},
        }

    @classmethod
    def from_dict(cls: "type[RuleConfig]", d: Mapping[str, Any]) -> "RuleConfig":
        """Inverse of :py:meth:`to_dict`."""
        rules = {int(k): v for k, v in dict(d.get("attn_rules", {})).items()}
        return cls(rules, float(d.get("epsilon", 1e-6)))

    def __eq__(self: "RuleConfig", other: object) -> bool:
        return (
            isinstance(other, RuleConfig)
            and self._epsilon == other._epsilon
            and self._rules == other._rules
        )

    def __hash__(self: "RuleConfig") -> int:
        return hash((self._epsilon, tuple(self._rules.items())))

    def __repr__(self: "RuleConfig") -> str:
        return f"RuleConfig({self._rules!r}, epsilon={self._epsilon!r})"


def uniform_rules(n_layers: int, rule: AttentionRule, epsilon: float = 1e-6) -> RuleConfig:
    """The same rule at attention layers ``1..n_layers``."""
    return RuleConfig({i: rule for i in range(1, n_layers + 1)}, epsilon)


class AuditEntry:
    """Relevance totals around one rule application.

    Attributes
    ----------
    node : str
        Name of the operation.
    rule : str
        ``'epsilon'``, ``'bilinear'``, ``'softmax'``, ``'value_only'``,
        ``'residual'`` or ``'identity'``.
    upper : float
        Sum of the relevance arriving from above.
    upper_abs : float
        Sum of its magnitudes.
    lower : float
        Sum of the relevance handed to the inputs.
    absorbed : float
        Relevance taken by bias terms.

    """

    __slots__ = ("node", "rule", "upper", "upper_abs", "lower", "absorbed")

    def __init__(
        self: "AuditEntry",
        node: str,
        rule: str,
        upper: np.ndarray,
        lower: Iterable[np.ndarray],
        absorbed: float = 0.0,
    ) -> None:
        self.node = node
        self.rule = rule
        self.upper = float(np.sum(upper))
        self.upper_abs = float(np.sum(np.abs(upper)))
        self.lower = float(sum(float(np.sum(r)) for r in lower))
        self.absorbed = float(absorbed)

    @property
    def leak(self: "AuditEntry") -> float:
        """float: Relevance neither passed on nor absorbed."""
        return self.upper - self.lower - self.absorbed


class RelevanceMap:
    """Result of :py:func:`propagate`.

    Attributes
    ----------
    nodes : dict
        Relevance of every named intermediate, in the order they were
        reached (``'attn1.O'``, ``'attn1.A'``, ``'attn1.Z'``, ``'attn1.Q'``
        and so on, plus ``'<layer>.out'`` for layer outputs and
        ``'input'``).
    input_relevance : numpy.ndarray
        One score per input feature (pixel, token, entry or scalar).
    audit : list of AuditEntry
        Every rule application in the order applied.
    seed : float
        The relevance placed on the target logit.

    """

    def __init__(self: "RelevanceMap", seed: float) -> None:
        self.nodes: Dict[str, np.ndarray] = {}
        self.input_relevance: np.ndarray = np.zeros(0)
        self.audit: List[AuditEntry] = []
        self.seed = float(seed)

    def __getitem__(self: "RelevanceMap", name: str) -> np.ndarray:
        return self.nodes[name]

    def __contains__(self: "RelevanceMap", name: object) -> bool:
        return name in self.nodes

    @property
    def absorbed(self: "RelevanceMap") -> float:
        """float: Total relevance absorbed by biases."""
        return float(sum(e.absorbed for e in self.audit))

    def audit_frame(self: "RelevanceMap") -> pd.DataFrame:
        """The audit as a table, one row per rule application."""
        return pd.DataFrame(
            [
                {
                    "node": e.node,
                    "rule": e.rule,
                    "upper": e.upper,
                    "lower": e.lower,
                    "absorbed": e.absorbed,
                    "leak": e.leak,
                }
                for e in self.audit
            ],
            columns=["node", "rule", "upper", "lower", "absorbed", "leak"],
        )


def _epsilon_parts(
    R_out: Matrix,
    x: Matrix,
    W: Matrix,
    eps: float,
    bias: Optional[Matrix] = None,
) -> Tuple[Matrix, float]:
    z = x @ W
    if bias is not None:
        z = z + bias
    s = R_out / stabilize(z, eps)
    R_in = x * (s @ W.T)
    absorbed = 0.0 if bias is None else float(np.sum(bias * s))
    return R_in, absorbed


def epsilon_linear(
    R_out: Matrix,
    x: Matrix,
    W: Matrix,
    eps: float = 1e-6,
    bias: Optional[Matrix] = None,
) -> Matrix:
    """The epsilon rule for ``z = x @ W (+ bias)``.

    ``R_in[t, i] = sum_j x[t, i] W[i, j] / (z[t, j] + eps sign(z[t, j]))
    R_out[t, j]``. The bias, when given, enters the denominator only, so
    the share of relevance it accounts for is not passed on.

    Parameters
    ----------
    R_out : numpy.ndarray
        Relevance of `z`, ``T x m``.
    x : numpy.ndarray
        Input, ``T x n``.
    W : numpy.ndarray
        Weights, ``n x m``.
    eps : float, optional
        Positive stabilizer.
    bias : numpy.ndarray, optional
        ``1 x m`` bias.

    Returns
    -------
    R_in : numpy.ndarray
        Same shape as `x`.

    """
    R_in, _ = _epsilon_parts(
        as_matrix(R_out, "R_out"),
        as_matrix(x, "x"),
        as_matrix(W, "W"),
        eps,
        None if bias is None else as_matrix(bias, "bias"),
    )
    return R_in


def bilinear_matmul(
    R_C: Matrix,
    X: Matrix,
    Y: Matrix,
    eps: float = 1e-6,
    scale: float = 1.0,
) -> Tuple[Matrix, Matrix]:
    """Split relevance over both factors of ``C = scale * X @ Y``.

    Each term ``scale * X[j, i] Y[i, p]`` of ``C[j, p]`` gets the share
    ``term / (2 C[j, p] + eps sign(C[j, p]))`` of ``R_C[j, p]`` on each
    side, so that as ``eps`` goes to zero both factors receive half of
    the total.

    Returns
    -------
    R_X, R_Y : numpy.ndarray
        Same shapes as `X` and `Y`.

    """
    R_C = as_matrix(R_C, "R_C")
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    C = (X @ Y) * scale
    s = R_C / stabilize(2.0 * C, eps)
    R_X = X * ((s @ Y.T) * scale)
    R_Y = Y * ((X.T @ s) * scale)
    return R_X, R_Y


def bilinear_av(
    R_O: Matrix,
    A: Matrix,
    V: Matrix,
    eps: float = 1e-6,
) -> Tuple[Matrix, Matrix]:
    """Relevance of ``A`` and ``V`` in ``O = A @ V``.

    See Also
    --------
    bilinear_matmul

    """
    return bilinear_matmul(R_O, A, V, eps)


def bilinear_qk(
    R_Z: Matrix,
    Q: Matrix,
    K: Matrix,
    d_k: int,
    eps: float = 1e-6,
) -> Tuple[Matrix, Matrix]:
    """Relevance of ``Q`` and ``K`` in ``Z = Q @ K.T / sqrt(d_k)``."""
    R_Q, R_KT = bilinear_matmul(R_Z, Q, as_matrix(K, "K").T, eps, 1.0 / math.sqrt(d_k))
    return R_Q, np.ascontiguousarray(R_KT.T)


def softmax_rule(R_A: Matrix, Z: Matrix, A: Matrix) -> Matrix:
    """Relevance of the logits of ``A = softmax_rows(Z)``.

    ``R_Z[j, i] = Z[j, i] * (R_A[j, i] - A[j, i] * sum_i' R_A[j, i'])``.

    """
    R_A = as_matrix(R_A, "R_A")
    Z = as_matrix(Z, "Z")
    A = as_matrix(A, "A")
    return Z * (R_A - A * R_A.sum(axis=1, keepdims=True))


def cp_value_only(
    R_O: Matrix,
    A: Matrix,
    V: Matrix,
    eps: float = 1e-6,
) -> Tuple[Matrix, Matrix]:
    """Relevance of ``O = A @ V`` with ``A`` treated as a constant.

    Returns
    -------
    R_A : numpy.ndarray
        All zeros.
    R_V : numpy.ndarray
        The epsilon rule applied to the map ``V -> A @ V``.

    """
    R_O = as_matrix(R_O, "R_O")
    A = as_matrix(A, "A")
    V = as_matrix(V, "V")
    s = R_O / stabilize(A @ V, eps)
    return np.zeros_like(A), V * (A.T @ s)


class _Walker:
    """State of one backward walk."""

    def __init__(self: "_Walker", trace: ForwardTrace, cfg: RuleConfig, rmap: RelevanceMap) -> None:
        self.trace = trace
        self.params = trace.model._params
        self.eps = cfg.epsilon
        self.cfg = cfg
        self.rmap = rmap

    def record(
        self: "_Walker",
        node: str,
        rule: str,
        upper: np.ndarray,
        lower: Iterable[np.ndarray],
        absorbed: float = 0.0,
    ) -> None:
        self.rmap.audit.append(AuditEntry(node, rule, upper, lower, absorbed))

    def linear(
        self: "_Walker",
        node: str,
        R: Matrix,
        x: Matrix,
        W: Matrix,
        bias: Optional[Matrix] = None,
    ) -> Matrix:
        R_in, absorbed = _epsilon_parts(R, x, W, self.eps, bias)
        self.record(node, "epsilon", R, [R_in], absorbed)
        return R_in

    def residual(self: "_Walker", node: str, R: Matrix, x: Matrix, branch: Matrix) -> Tuple[Matrix, Matrix]:
        s = R / stabilize(x + branch, self.eps)
        R_x, R_b = x * s, branch * s
        self.record(node, "residual", R, [R_x, R_b])
        return R_x, R_b

    def projections(self: "_Walker", rec: LayerRecord, R_Q: Matrix, R_K: Matrix, R_V: Matrix) -> Matrix:
        spec, x = rec.spec, rec.input
        R_x = np.zeros_like(x)
        for suffix, R in (("W_Q", R_Q), ("W_K", R_K), ("W_V", R_V)):
            R_x += self.linear(spec.param(suffix), R, x, self.params[spec.param(suffix)])
        return R_x

    def attention_core(self: "_Walker", rec: LayerRecord, R_O: Matrix) -> Tuple[Matrix, Matrix, Matrix]:
        spec, c = rec.spec, rec.cache
        nodes = self.rmap.nodes
        name = spec.name
        rule = self.cfg.rule_for(int(spec.get("index")))
        d_k = int(spec.get("d_k"))
        scale = 1.0 / math.sqrt(d_k)
        Q, K, V = c["Q"], c["K"], c["V"]
        nodes[f"{name}.O"] = R_O
        if spec.kind == "softmax_attention":
            A, Z = c["A"], c["Z"]
            if rule == "cplrp":
                R_A, R_V = cp_value_only(R_O, A, V, self.eps)
                self.record(f"{name}.AV", "value_only", R_O, [R_V])
                R_Z = np.zeros_like(Z)
                R_Q, R_K = np.zeros_like(Q), np.zeros_like(K)
            else:
                R_A, R_V = bilinear_av(R_O, A, V, self.eps)
                self.record(f"{name}.AV", "bilinear", R_O, [R_A, R_V])
                R_Z = softmax_rule(R_A, Z, A)
                self.record(f"{name}.softmax", "softmax", R_A, [R_Z])
                R_Q, R_K = bilinear_qk(R_Z, Q, K, d_k, self.eps)
                self.record(f"{name}.QK", "bilinear", R_Z, [R_Q, R_K])
            nodes[f"{name}.A"] = R_A
            nodes[f"{name}.Z"] = R_Z
        elif spec.get("order") == "av_first":
            Z = c["Z"]
            if rule == "cplrp":
                R_Z, R_V = cp_value_only(R_O, Z, V, self.eps)
                self.record(f"{name}.AV", "value_only", R_O, [R_V])
                R_Q, R_K = np.zeros_like(Q), np.zeros_like(K)
            else:
                R_Z, R_V = bilinear_av(R_O, Z, V, self.eps)
                self.record(f"{name}.AV", "bilinear", R_O, [R_Z, R_V])
                R_Q, R_K = bilinear_qk(R_Z, Q, K, d_k, self.eps)
                self.record(f"{name}.QK", "bilinear", R_Z, [R_Q, R_K])
            nodes[f"{name}.A"] = R_Z
            nodes[f"{name}.Z"] = R_Z
        else:
            S = c["S"]
            if rule == "cplrp":
                M = (Q @ K.T) * scale
                _, R_V = cp_value_only(R_O, M, V, self.eps)
                self.record(f"{name}.QKV", "value_only", R_O, [R_V])
                R_S = np.zeros_like(S)
                R_Q, R_K = np.zeros_like(Q), np.zeros_like(K)
            else:
                R_Q, R_S = bilinear_matmul(R_O, Q, S, self.eps, scale)
                self.record(f"{name}.QS", "bilinear", R_O, [R_Q, R_S])
                R_KT, R_V = bilinear_matmul(R_S, K.T, V, self.eps)
                R_K = np.ascontiguousarray(R_KT.T)
                self.record(f"{name}.KV", "bilinear", R_S, [R_K, R_V])
            nodes[f"{name}.S"] = R_S
        nodes[f"{name}.Q"] = R_Q
        nodes[f"{name}.K"] = R_K
        nodes[f"{name}.V"] = R_V
        return R_Q, R_K, R_V

    def step(self: "_Walker", rec: LayerRecord, R: Matrix) -> Matrix:
        spec = rec.spec
        kind = spec.kind
        params = self.params
        if kind in ("linear", "classifier"):
            return self.linear(
                spec.name,
                R,
                rec.input,
                params[spec.param("W")],
                params.get(spec.param("b")),
            )
        if kind == "relu":
            self.record(spec.name, "identity", R, [R])
            return R
        if kind == "mean_pool":
            x = rec.input
            keep = self.trace.keep
            weights = np.ones(x.shape[0]) if keep is None else keep.astype(np.float64)
            n = weights.sum()
            if n == 0:
                self.record(spec.name, "epsilon", R, [], float(np.sum(R)))
                return np.zeros_like(x)
            s = R / stabilize(rec.output, self.eps)
            R_in = (x * weights[:, None] / n) * s
            self.record(spec.name, "epsilon", R, [R_in])
            return R_in
        if kind == "linear_attention":
            R_Q, R_K, R_V = self.attention_core(rec, R)
            return self.projections(rec, R_Q, R_K, R_V)
        if kind == "softmax_attention":
            c = rec.cache
            R_x, R_U = self.residual(f"{spec.name}.residual", R, rec.input, c["U"])
            R_O = self.linear(spec.param("W_O"), R_U, c["O"], params[spec.param("W_O")])
            R_Q, R_K, R_V = self.attention_core(rec, R_O)
            return R_x + self.projections(rec, R_Q, R_K, R_V)
        if kind == "feed_forward":
            c = rec.cache
            R_x, R_F = self.residual(f"{spec.name}.residual", R, rec.input, c["F"])
            R_H = self.linear(
                spec.param("W2"), R_F, c["H"], params[spec.param("W2")], params[spec.param("b2")]
            )
            self.record(f"{spec.name}.relu", "identity", R_H, [R_H])
            R_P = self.linear(
                spec.param("W1"), R_H, rec.input, params[spec.param("W1")], params[spec.param("b1")]
            )
            return R_x + R_P
        if kind == "embedding":
            return self.embedding(rec, R)
        raise PropagationError(f"No relevance rule for layer kind {kind!r}.")

    def embedding(self: "_Walker", rec: LayerRecord, R: Matrix) -> Matrix:
        spec = rec.spec
        if "pre_embedded" in rec.cache or spec.get("mode") == "token":
            self.record(spec.name, "identity", R, [R])
            return R.sum(axis=1)
        # Each output entry has exactly one contributing pixel.
        contrib = rec.output
        s = R / stabilize(contrib, self.eps)
        R_pix = (contrib * s).sum(axis=1)
        self.record(spec.name, "epsilon", R, [R_pix])
        return R_pix


def _seed(logits: np.ndarray, target: int) -> Tuple[np.ndarray, float]:
    n = logits.shape[0]
    if not isinstance(target, (int, np.integer)) or isinstance(target, bool):
        raise TypeError("target must be an int.")
    if not 0 <= target < n:
        raise ValueError(f"target {target} is out of range for {n} logits.")
    value = float(logits[target])
    if value <= 0.0:
        warnings.warn(
            f"Relevance is seeded with the raw target logit, which is {value:g} "
            "here, so the signs of all scores are flipped.",
            RuntimeWarning,
        )
    R = np.zeros((1, n))
    R[0, target] = value
    return R, value


def _propagate_scalar(trace: ScalarTrace, target: int, eps: float) -> RelevanceMap:
    R_y, value = _seed(trace.logits, target)
    rmap = RelevanceMap(value)
    x1, x2, x3 = (float(v) for v in trace.inputs)
    rmap.nodes["y"] = R_y
    if trace.order == "left":
        R_h, R_x3 = bilinear_matmul(R_y, [[trace.h]], [[x3]], eps)
        rmap.audit.append(AuditEntry("y", "bilinear", R_y, [R_h, R_x3]))
        R_x1, R_x2 = bilinear_matmul(R_h, [[x1]], [[x2]], eps)
        rmap.audit.append(AuditEntry("h", "bilinear", R_h, [R_x1, R_x2]))
    else:
        R_x1, R_h = bilinear_matmul(R_y, [[x1]], [[trace.h]], eps)
        rmap.audit.append(AuditEntry("y", "bilinear", R_y, [R_x1, R_h]))
        R_x2, R_x3 = bilinear_matmul(R_h, [[x2]], [[x3]], eps)
        rmap.audit.append(AuditEntry("h", "bilinear", R_h, [R_x2, R_x3]))
    rmap.nodes["h"] = R_h
    rmap.input_relevance = np.array([R_x1[0, 0], R_x2[0, 0], R_x3[0, 0]])
    rmap.nodes["input"] = rmap.input_relevance
    return rmap


def propagate(
    trace: Union[ForwardTrace, ScalarTrace],
    target: int,
    cfg: Optional[RuleConfig] = None,
) -> RelevanceMap:
    """Propagate the relevance of one logit back to the input.

    The target logit's raw value is placed on it (all other logits get
    zero) and the layers are walked in reverse. Attention layers use the
    rule `cfg` assigns to their index. Linear maps, pooling and
    embeddings use the epsilon rule, residual sums split relevance in
    proportion to each summand, ReLU passes relevance through and scalar
    products split it evenly.

    Parameters
    ----------
    trace : ForwardTrace or ScalarTrace
        A complete forward pass.
    target : int
        The logit to explain.
    cfg : RuleConfig, optional
        Rules to use. The default applies ``'attnlrp'`` everywhere with
        ``epsilon=1e-6``.

    Returns
    -------
    rmap : RelevanceMap

    Raises
    ------
    PropagationError
        If an attention layer has no rule assigned or a layer kind has no
        rule.
    ValueError
        If `target` is out of range.

    """
    if isinstance(trace, ScalarTrace):
        return _propagate_scalar(trace, target, (cfg or RuleConfig()).epsilon)
    if not isinstance(trace, ForwardTrace):
        raise TypeError("trace must be a ForwardTrace or ScalarTrace.")
    model = trace.model
    if cfg is None:
        cfg = uniform_rules(len(model.attention_layers()), "attnlrp")
    for spec in model.attention_layers():
        cfg.rule_for(int(spec.get("index")))
    R, value = _seed(trace.logits, target)
    logger.debug("Seeding relevance with logit %d = %g", target, value)
    rmap = RelevanceMap(value)
    walker = _Walker(trace, cfg, rmap)
    for rec in reversed(trace.records):
        rmap.nodes[f"{rec.spec.name}.out"] = R
        R = walker.step(rec, R)
    rmap.input_relevance = np.asarray(R, dtype=np.float64).reshape(-1)
    rmap.nodes["input"] = rmap.input_relevance
    return rmap
