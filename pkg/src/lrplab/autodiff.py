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

"""Module for reverse-mode gradients.

Gradients are computed layer by layer from the intermediates stored in a
:py:class:`lrplab.model.ForwardTrace`. They flow through the softmax
exactly, which is where they part ways with relevance propagation (see
:py:mod:`lrplab.relprop`).

"""

import math
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from . import model as _model
from .model import ForwardTrace, LayerRecord, ModelGraph, ScalarChain, ScalarTrace
from .tensor import Matrix

Trace = Union[ForwardTrace, ScalarTrace]


class GradientSet:
    """Gradients of one scalar output.

    Attributes
    ----------
    d_input : numpy.ndarray
        Gradient with respect to the input. Same shape as the input for
        pixel, vector and scalar models. For token models (and whenever
        the forward pass was fed embedding rows) it is the gradient with
        respect to the ``T x d`` embedding rows.
    d_params : dict
        Gradient of every model parameter, same names and shapes.

    """

    __slots__ = ("d_input", "d_params")

    def __init__(
        self: "GradientSet",
        d_input: np.ndarray,
        d_params: Dict[str, np.ndarray],
    ) -> None:
        self.d_input = d_input
        self.d_params = d_params


def cross_entropy(logits: np.ndarray, label: int) -> Tuple[float, np.ndarray]:
    """Softmax cross-entropy loss and its gradient.

    Parameters
    ----------
    logits : numpy.ndarray
        One dimensional logits.
    label : int
        The true class.

    Returns
    -------
    loss : float
    d_logits : numpy.ndarray
        ``softmax(logits) - onehot(label)``.

    """
    z = np.asarray(logits, dtype=np.float64).reshape(-1)
    if not 0 <= label < z.shape[0]:
        raise ValueError(f"label {label} is out of range for {z.shape[0]} classes.")
    shifted = z - z.max()
    log_norm = math.log(float(np.exp(shifted).sum()))
    loss = log_norm - float(shifted[label])
    d_logits = np.exp(shifted - log_norm)
    d_logits[label] -= 1.0
    return loss, d_logits


def _onehot(trace: Trace, target: int) -> np.ndarray:
    n = trace.logits.shape[0]
    if not isinstance(target, (int, np.integer)) or isinstance(target, bool):
        raise TypeError("target must be an int.")
    if not 0 <= target < n:
        raise ValueError(f"target {target} is out of range for {n} logits.")
    g = np.zeros(n)
    g[target] = 1.0
    return g


def _backward_attention(
    rec: LayerRecord,
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    g: Matrix,
    keep: Optional[np.ndarray],
) -> Matrix:
    spec, c, x = rec.spec, rec.cache, rec.input
    scale = 1.0 / math.sqrt(float(spec.get("d_k")))
    Q, K, V = c["Q"], c["K"], c["V"]
    if spec.kind == "softmax_attention":
        grads[spec.param("W_O")] += c["O"].T @ g
        dO = g @ params[spec.param("W_O")].T
        A = c["A"]
        dA = dO @ V.T
        dV = A.T @ dO
        dZ = A * (dA - (dA * A).sum(axis=1, keepdims=True))
        dQ = (dZ @ K) * scale
        dK = (dZ.T @ Q) * scale
        dx = g.copy()
    elif spec.get("order") == "av_first":
        Z = c["Z"]
        dZ = g @ V.T
        dV = Z.T @ g
        dQ = (dZ @ K) * scale
        dK = (dZ.T @ Q) * scale
        dx = np.zeros_like(x)
    else:
        S = c["S"]
        dQ = (g @ S.T) * scale
        dS = (Q.T @ g) * scale
        dK = V @ dS.T
        dV = K @ dS
        dx = np.zeros_like(x)
    if keep is not None:
        dK = dK * keep[:, None]
        dV = dV * keep[:, None]
    for suffix, d in (("W_Q", dQ), ("W_K", dK), ("W_V", dV)):
        grads[spec.param(suffix)] += x.T @ d
        dx += d @ params[spec.param(suffix)].T
    return dx


def _backward_feed_forward(
    rec: LayerRecord,
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    g: Matrix,
) -> Matrix:
    spec, c = rec.spec, rec.cache
    grads[spec.param("W2")] += c["H"].T @ g
    grads[spec.param("b2")] += g.sum(axis=0, keepdims=True)
    dP = (g @ params[spec.param("W2")].T) * (c["P"] > 0.0)
    grads[spec.param("W1")] += rec.input.T @ dP
    grads[spec.param("b1")] += dP.sum(axis=0, keepdims=True)
    return g + dP @ params[spec.param("W1")].T


def _backward_embedding(
    rec: LayerRecord,
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    g: Matrix,
    inputs: np.ndarray,
) -> np.ndarray:
    spec = rec.spec
    if "pre_embedded" in rec.cache:
        return g
    if spec.get("mode") == "pixel":
        W = params[spec.param("W")]
        grads[spec.param("W")] += rec.input * g
        return (g * W).sum(axis=1).reshape(inputs.shape)
    ids = rec.input.reshape(-1).astype(np.int64)
    np.add.at(grads[spec.param("E")], ids, g)
    grads[spec.param("P")] += g
    return g


def _backward_scalar(trace: ScalarTrace, d_y: float) -> GradientSet:
    x1, x2, x3 = (float(v) for v in trace.inputs)
    return GradientSet(np.array([x2 * x3, x1 * x3, x1 * x2]) * d_y, {})


def backward_from(trace: Trace, d_logits: np.ndarray) -> GradientSet:
    """Back-propagate an arbitrary gradient of the logits.

    Parameters
    ----------
    trace : ForwardTrace or ScalarTrace
        A complete forward pass.
    d_logits : numpy.ndarray
        Gradient of the scalar of interest with respect to the logits.

    Returns
    -------
    grads : GradientSet

    See Also
    --------
    backward

    """
    d_logits = np.asarray(d_logits, dtype=np.float64).reshape(-1)
    if d_logits.shape != trace.logits.shape:
        raise ValueError("d_logits must have one entry per logit.")
    if isinstance(trace, ScalarTrace):
        return _backward_scalar(trace, float(d_logits[0]))
    model: ModelGraph = trace.model
    params = model._params
    grads = {name: np.zeros_like(value) for name, value in params.items()}
    g: np.ndarray = d_logits.reshape(1, -1)
    keep = trace.keep
    for rec in reversed(trace.records):
        spec = rec.spec
        kind = spec.kind
        if kind in ("linear", "classifier"):
            grads[spec.param("W")] += rec.input.T @ g
            if spec.param("b") in grads:
                grads[spec.param("b")] += g.sum(axis=0, keepdims=True)
            g = g @ params[spec.param("W")].T
        elif kind == "relu":
            g = g * (rec.input > 0.0)
        elif kind == "mean_pool":
            n_rows = rec.input.shape[0]
            if keep is None:
                g = np.repeat(g / n_rows, n_rows, axis=0)
            else:
                n_kept = int(keep.sum())
                full = np.zeros_like(rec.input)
                if n_kept:
                    full[keep] = g / n_kept
                g = full
        elif kind in _model.ATTENTION_KINDS:
            g = _backward_attention(rec, params, grads, g, keep)
        elif kind == "feed_forward":
            g = _backward_feed_forward(rec, params, grads, g)
        else:
            g = _backward_embedding(rec, params, grads, g, trace.inputs)
    if model.layers[0].kind != "embedding":
        g = g.reshape(trace.inputs.shape)
    return GradientSet(g, grads)


def backward(trace: Trace, target: int) -> GradientSet:
    """Gradients of one logit.

    Parameters
    ----------
    trace : ForwardTrace or ScalarTrace
        A complete forward pass.
    target : int
        Index of the logit to differentiate.

    Returns
    -------
    grads : GradientSet

    Raises
    ------
    TypeError
        If `target` is not an int.
    ValueError
        If `target` is out of range.

    """
    return backward_from(trace, _onehot(trace, target))


def _evaluator(model: Union[ModelGraph, ScalarChain], x: Any) -> Tuple[Any, bool]:
    if isinstance(model, ScalarChain):
        return np.asarray(x, dtype=np.float64).reshape(-1), False
    if model.feature_kind == "token":
        return _model.embed(model, x), True
    return np.asarray(x, dtype=np.float64), False


def grad_check(
    model: Union[ModelGraph, ScalarChain],
    x: Any,
    target: int,
    h: float = 1e-5,
    n_coords: int = 50,
    seed: int = 0,
) -> float:
    """Compare analytic input gradients against central differences.

    Token models are checked with respect to their embedding rows.

    Parameters
    ----------
    model : ModelGraph or ScalarChain
    x : array_like
        The example.
    target : int
        The logit to differentiate.
    h : float, optional
        Finite difference step, in ``[1e-7, 1e-3]``.
    n_coords : int, optional
        Number of randomly sampled coordinates (all of them if there are
        fewer).
    seed : int, optional
        Seed of the coordinate sampling.

    Returns
    -------
    err : float
        Largest relative error ``|a - n| / max(|a|, |n|, 1e-8)``.

    Raises
    ------
    ValueError
        If `h` is out of range.

    """
    if not 1e-7 <= h <= 1e-3:
        raise ValueError("h must be in [1e-7, 1e-3].")
    point, pre_embedded = _evaluator(model, x)

    def f(v: np.ndarray) -> float:
        if isinstance(model, ScalarChain):
            return float(model.forward(v).logits[target])
        return float(_model.forward(model, v, pre_embedded=pre_embedded).logits[target])

    if isinstance(model, ScalarChain):
        analytic = backward(model.forward(point), target).d_input
    else:
        trace = _model.forward(model, point, pre_embedded=pre_embedded)
        analytic = backward(trace, target).d_input
    analytic = np.asarray(analytic).reshape(-1)
    flat = np.array(point, dtype=np.float64).reshape(-1)
    rng = np.random.default_rng(seed)
    coords = rng.choice(flat.size, size=min(n_coords, flat.size), replace=False)
    worst = 0.0
    for i in coords:
        plus = flat.copy()
        minus = flat.copy()
        plus[i] += h
        minus[i] -= h
        numeric = (f(plus.reshape(np.shape(point))) - f(minus.reshape(np.shape(point)))) / (2 * h)
        a = float(analytic[i])
        err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        worst = max(worst, err)
    return worst
