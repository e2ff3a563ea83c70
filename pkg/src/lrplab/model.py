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

"""Module for the computation graphs and their forward passes.

A :py:class:`ModelGraph` is an ordered list of :py:class:`LayerSpec`
plus the named parameter matrices they use. :py:func:`forward` runs it
on one example and returns a :py:class:`ForwardTrace` holding every
intermediate that gradients and relevance propagation need (for
attention layers ``Q``, ``K``, ``V``, the logits ``Z``, the weights
``A`` and the readout ``O``).

Row vectors are the convention throughout: activations are ``T x d``
matrices with one row per position and weights are stored ``d_in x
d_out``, so a linear layer computes ``x @ W + b``.

Three families of graphs are built here.

* The two linear attention networks of the factorization experiment,
  identical in parameters and differing only in whether the readout is
  grouped as ``(Q K^T) V`` (``'av_first'``) or ``Q (K^T V)``
  (``'kv_first'``). See :py:func:`build_qkv_pair`.
* A single head softmax attention encoder with residual connections
  and ReLU feed-forward blocks, mean pooling and a linear classifier.
  See :py:func:`build_encoder`.
* Stacks of linear layers on a row vector (:py:func:`build_linear`).

There is also the scalar product ``x1 * x2 * x3`` in both groupings
(:py:class:`ScalarChain`).

"""

import json
import math
import sys
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import tensor
from .exceptions import ShapeError
from .tensor import Matrix

if sys.version_info >= (3, 8):
    from typing import Literal

    LayerKind = Literal[
        "embedding",
        "linear",
        "relu",
        "linear_attention",
        "softmax_attention",
        "feed_forward",
        "mean_pool",
        "classifier",
    ]
    AttentionOrder = Literal["av_first", "kv_first"]
    ChainOrder = Literal["left", "right"]
    FeatureKind = Literal["pixel", "token", "vector", "scalar"]
else:
    LayerKind = str
    AttentionOrder = str
    ChainOrder = str
    FeatureKind = str

LAYER_KINDS = (
    "embedding",
    "linear",
    "relu",
    "linear_attention",
    "softmax_attention",
    "feed_forward",
    "mean_pool",
    "classifier",
)
ATTENTION_KINDS = ("linear_attention", "softmax_attention")

# Parameter suffixes each layer kind needs.
_PARAM_SUFFIXES: Dict[str, Tuple[str, ...]] = {
    "embedding": (),
    "linear": ("W",),
    "relu": (),
    "linear_attention": ("W_Q", "W_K", "W_V"),
    "softmax_attention": ("W_Q", "W_K", "W_V", "W_O"),
    "feed_forward": ("W1", "b1", "W2", "b2"),
    "mean_pool": (),
    "classifier": ("W", "b"),
}


class LayerSpec:
    """Description of one layer of a :py:class:`ModelGraph`.

    Parameters
    ----------
    kind : str
        One of ``'embedding'``, ``'linear'``, ``'relu'``,
        ``'linear_attention'``, ``'softmax_attention'``,
        ``'feed_forward'``, ``'mean_pool'`` and ``'classifier'``.
    name : str
        Prefix of the layer's parameter names (``name + '.W'`` etc.).
    **shape :
        Shape parameters of the kind. ``d_in`` and ``d_out`` for every
        kind, plus ``mode`` (``'pixel'`` or ``'token'``), ``seq_len`` and
        ``vocab_size`` for embeddings, ``bias`` for linear layers,
        ``d_k`` and ``index`` for attention, ``order`` for linear
        attention and ``d_hidden`` for feed-forward blocks.

    Raises
    ------
    ValueError
        If `kind` is unknown or a required shape parameter is missing.

    """

    def __init__(self: "LayerSpec", kind: LayerKind, name: str, **shape: Any) -> None:
        if kind not in LAYER_KINDS:
            raise ValueError(f"Unknown layer kind {kind!r}.")
        for key in ("d_in", "d_out"):
            if key not in shape:
                raise ValueError(f"Layer {name!r} needs the shape parameter {key!r}.")
        if kind == "linear_attention" and shape.get("order") not in (
            "av_first",
            "kv_first",
        ):
            raise ValueError("order must be 'av_first' or 'kv_first'.")
        if kind == "embedding" and shape.get("mode") not in ("pixel", "token"):
            raise ValueError("embedding mode must be 'pixel' or 'token'.")
        self._kind: str = kind
        self._name: str = name
        self._shape: Dict[str, Any] = dict(shape)

    @property
    def kind(self: "LayerSpec") -> str:
        """str: The layer kind."""
        return self._kind

    @property
    def name(self: "LayerSpec") -> str:
        """str: The parameter name prefix."""
        return self._name

    @property
    def shape(self: "LayerSpec") -> Dict[str, Any]:
        """dict: Copy of the shape parameters."""
        return dict(self._shape)

    @property
    def d_in(self: "LayerSpec") -> int:
        """int: Width of the input rows."""
        return int(self._shape["d_in"])

    @property
    def d_out(self: "LayerSpec") -> int:
        """int: Width of the output rows."""
        return int(self._shape["d_out"])

    def get(self: "LayerSpec", key: str, default: Any = None) -> Any:
        """Get a shape parameter."""
        return self._shape.get(key, default)

    def param(self: "LayerSpec", suffix: str) -> str:
        """Full name of one of the layer's parameters."""
        return f"{self._name}.{suffix}"

    def param_names(self: "LayerSpec") -> Tuple[str, ...]:
        """Full names of every parameter the layer uses."""
        suffixes = _PARAM_SUFFIXES[self._kind]
        if self._kind == "linear" and self._shape.get("bias", False):
            suffixes = ("W", "b")
        if self._kind == "embedding":
            if self._shape["mode"] == "pixel":
                suffixes = ("W",)
            else:
                suffixes = ("E", "P")
        return tuple(self.param(s) for s in suffixes)

    def to_dict(self: "LayerSpec") -> Dict[str, Any]:
        """JSON-ready description."""
        return {"kind": self._kind, "name": self._name, **self._shape}

    @classmethod
    def from_dict(cls: "type[LayerSpec]", d: Mapping[str, Any]) -> "LayerSpec":
        """Inverse of :py:meth:`to_dict`."""
        d = dict(d)
        return cls(d.pop("kind"), d.pop("name"), **d)

    def __eq__(self: "LayerSpec", other: object) -> bool:
        return isinstance(other, LayerSpec) and self.to_dict() == other.to_dict()

    def __hash__(self: "LayerSpec") -> int:
        return hash(json.dumps(self.to_dict(), sort_keys=True))

    def __repr__(self: "LayerSpec") -> str:
        return f"LayerSpec({self._kind!r}, {self._name!r}, **{self._shape!r})"


def _expected_param_shapes(spec: LayerSpec) -> Dict[str, Tuple[int, ...]]:
    d_in, d_out = spec.d_in, spec.d_out
    kind = spec.kind
    if kind == "embedding":
        if spec.get("mode") == "pixel":
            return {spec.param("W"): (spec.get("seq_len"), d_out)}
        return {
            spec.param("E"): (spec.get("vocab_size"), d_out),
            spec.param("P"): (spec.get("seq_len"), d_out),
        }
    if kind in ("linear", "classifier"):
        shapes = {spec.param("W"): (d_in, d_out)}
        if kind == "classifier" or spec.get("bias", False):
            shapes[spec.param("b")] = (1, d_out)
        return shapes
    if kind in ATTENTION_KINDS:
        d_k = spec.get("d_k")
        shapes = {
            spec.param("W_Q"): (d_in, d_k),
            spec.param("W_K"): (d_in, d_k),
            spec.param("W_V"): (d_in, d_out if kind == "linear_attention" else d_k),
        }
        if kind == "softmax_attention":
            shapes[spec.param("W_O")] = (d_k, d_out)
        return shapes
    if kind == "feed_forward":
        d_hidden = spec.get("d_hidden")
        return {
            spec.param("W1"): (d_in, d_hidden),
            spec.param("b1"): (1, d_hidden),
            spec.param("W2"): (d_hidden, d_out),
            spec.param("b2"): (1, d_out),
        }
    return {}


class ModelGraph:
    """An ordered computation graph with its parameters.

    Instances are immutable: the parameter arrays are copied and made
    read-only, and training produces new instances through
    :py:meth:`with_params`.

    Parameters
    ----------
    layers : Sequence of LayerSpec
        The layers in forward order. The last one must produce a single
        row, the logits.
    params : Mapping of str to numpy.ndarray
        Every parameter the layers name, with conforming shapes.

    Raises
    ------
    ShapeError
        If a parameter has the wrong shape or adjacent layers do not
        conform.
    KeyError
        If a parameter is missing.

    Attributes
    ----------
    layers : tuple of LayerSpec
    params : dict
    feature_kind : {'pixel', 'token', 'vector'}
    num_classes : int
    d_k : int or None

    """

    def __init__(
        self: "ModelGraph",
        layers: Sequence[LayerSpec],
        params: Mapping[str, np.ndarray],
    ) -> None:
        if len(layers) == 0:
            raise ValueError("A model needs at least one layer.")
        self._layers: Tuple[LayerSpec, ...] = tuple(layers)
        frozen: Dict[str, np.ndarray] = {}
        for spec in self._layers:
            for name, shape in _expected_param_shapes(spec).items():
                if name not in params:
                    raise KeyError(f"Missing parameter {name!r}.")
                value = np.array(params[name], dtype=np.float64, order="C")
                if value.shape != tuple(shape):
                    raise ShapeError(
                        f"Parameter {name!r} has shape {value.shape}, "
                        f"expected {tuple(shape)}.",
                    )
                value.flags.writeable = False
                frozen[name] = value
        for prev, nxt in zip(self._layers[:-1], self._layers[1:]):
            if prev.d_out != nxt.d_in:
                raise ShapeError(
                    f"Layer {prev.name!r} outputs width {prev.d_out} but "
                    f"{nxt.name!r} expects {nxt.d_in}.",
                )
        self._params: Dict[str, np.ndarray] = frozen

    @property
    def layers(self: "ModelGraph") -> Tuple[LayerSpec, ...]:
        """tuple of LayerSpec: The layers in forward order."""
        return self._layers

    @property
    def params(self: "ModelGraph") -> Dict[str, np.ndarray]:
        """dict: Read-only parameter arrays by name (a new dict)."""
        return dict(self._params)

    @property
    def feature_kind(self: "ModelGraph") -> str:
        """str: What an input feature is.

        ``'pixel'`` and ``'token'`` for models starting with a pixel or
        token embedding, ``'vector'`` otherwise.

        """
        first = self._layers[0]
        if first.kind == "embedding":
            return str(first.get("mode"))
        return "vector"

    @property
    def num_features(self: "ModelGraph") -> int:
        """int: Number of input features (pixels, tokens or entries)."""
        first = self._layers[0]
        if first.kind == "embedding":
            return int(first.get("seq_len"))
        return first.d_in

    @property
    def num_classes(self: "ModelGraph") -> int:
        """int: Number of logits."""
        return self._layers[-1].d_out

    @property
    def d_k(self: "ModelGraph") -> Optional[int]:
        """int or None: Key width of the first attention layer."""
        for spec in self.attention_layers():
            return int(spec.get("d_k"))
        return None

    def attention_layers(self: "ModelGraph") -> List[LayerSpec]:
        """The attention layers in forward order.

        Their ``index`` shape parameter numbers them ``1..L``.

        """
        return [s for s in self._layers if s.kind in ATTENTION_KINDS]

    def param(self: "ModelGraph", name: str) -> np.ndarray:
        """Get a single parameter (read-only)."""
        return self._params[name]

    def with_params(self: "ModelGraph", params: Mapping[str, np.ndarray]) -> "ModelGraph":
        """Same layers, new parameters."""
        return ModelGraph(self._layers, params)

    def with_layers(self: "ModelGraph", layers: Sequence[LayerSpec]) -> "ModelGraph":
        """Same parameters, new layers (e.g. another grouping)."""
        return ModelGraph(layers, self._params)

    def architecture(self: "ModelGraph") -> Dict[str, Any]:
        """JSON-ready description of the layers."""
        return {"layers": [s.to_dict() for s in self._layers]}

    @classmethod
    def from_architecture(
        cls: "type[ModelGraph]",
        architecture: Mapping[str, Any],
        params: Mapping[str, np.ndarray],
    ) -> "ModelGraph":
        """Inverse of :py:meth:`architecture`."""
        return cls([LayerSpec.from_dict(d) for d in architecture["layers"]], params)


class LayerRecord:
    """What one layer saw and produced during a forward pass.

    Attributes
    ----------
    spec : LayerSpec
    input : numpy.ndarray
    output : numpy.ndarray
    cache : dict
        Named intermediates. Attention layers hold ``'Q'``, ``'K'``,
        ``'V'`` and ``'O'``, plus ``'Z'`` and ``'A'`` whenever the
        scores are formed (``'A'`` is ``'Z'`` itself for linear
        attention) and ``'S'`` (``K^T V``) for the ``'kv_first'``
        grouping. Softmax attention also holds ``'U'`` (``O @ W_O``),
        feed-forward blocks ``'P'``, ``'H'`` and ``'F'``.

    """

    __slots__ = ("spec", "input", "output", "cache")

    def __init__(
        self: "LayerRecord",
        spec: LayerSpec,
        inp: np.ndarray,
        output: np.ndarray,
        cache: Optional[Dict[str, np.ndarray]] = None,
    ) -> None:
        self.spec = spec
        self.input = inp
        self.output = output
        self.cache = cache if cache is not None else {}


class ForwardTrace:
    """A complete forward pass of a :py:class:`ModelGraph`.

    Attributes
    ----------
    model : ModelGraph
    inputs : numpy.ndarray
        The input as given (pixels, token ids or row vector).
    keep : numpy.ndarray of bool or None
        Token keep-mask, if one was used.
    records : list of LayerRecord
    logits : numpy.ndarray
        One dimensional logits.

    """

    __slots__ = ("model", "inputs", "keep", "records", "logits")

    def __init__(
        self: "ForwardTrace",
        model: ModelGraph,
        inputs: np.ndarray,
        keep: Optional[np.ndarray],
        records: List[LayerRecord],
    ) -> None:
        self.model = model
        self.inputs = inputs
        self.keep = keep
        self.records = records
        self.logits: np.ndarray = records[-1].output.reshape(-1)

    @property
    def embedded(self: "ForwardTrace") -> Optional[np.ndarray]:
        """numpy.ndarray or None: Output of the embedding layer."""
        if self.records[0].spec.kind == "embedding":
            return self.records[0].output
        return None

    def attention_records(self: "ForwardTrace") -> List[LayerRecord]:
        """Records of the attention layers in forward order."""
        return [r for r in self.records if r.spec.kind in ATTENTION_KINDS]


def _forward_embedding(
    spec: LayerSpec,
    params: Dict[str, np.ndarray],
    x: np.ndarray,
    pre_embedded: bool,
) -> LayerRecord:
    seq_len, d = int(spec.get("seq_len")), spec.d_out
    if pre_embedded:
        rows = tensor.as_matrix(x, "embedded input")
        if rows.shape != (seq_len, d):
            raise ShapeError(f"Embedded input must be {seq_len} x {d}, got {rows.shape}.")
        return LayerRecord(spec, rows, rows, {"pre_embedded": rows})
    if spec.get("mode") == "pixel":
        pixels = np.asarray(x, dtype=np.float64)
        if pixels.size != seq_len:
            raise ShapeError(f"Expected {seq_len} pixels, got shape {pixels.shape}.")
        col = tensor.as_matrix(pixels.reshape(seq_len, 1), "pixels")
        return LayerRecord(spec, col, col * params[spec.param("W")])
    ids = np.asarray(x, dtype=np.int64).reshape(-1)
    if ids.shape[0] != seq_len:
        raise ShapeError(f"Expected {seq_len} tokens, got {ids.shape[0]}.")
    vocab_size = int(spec.get("vocab_size"))
    if ids.size and (ids.min() < 0 or ids.max() >= vocab_size):
        raise ValueError(f"token ids must be in 0..{vocab_size - 1}.")
    rows = params[spec.param("E")][ids] + params[spec.param("P")]
    return LayerRecord(spec, ids.reshape(1, -1).astype(np.float64), rows)


def _forward_linear_attention(
    spec: LayerSpec,
    params: Dict[str, np.ndarray],
    x: Matrix,
    keep: Optional[np.ndarray],
) -> LayerRecord:
    scale = 1.0 / math.sqrt(float(spec.get("d_k")))
    Q = tensor.matmul(x, params[spec.param("W_Q")])
    K = tensor.matmul(x, params[spec.param("W_K")])
    V = tensor.matmul(x, params[spec.param("W_V")])
    if keep is not None:
        K = K * keep[:, None]
        V = V * keep[:, None]
    cache = {"Q": Q, "K": K, "V": V}
    if spec.get("order") == "av_first":
        Z = tensor.matmul(Q, K.T) * scale
        O = tensor.matmul(Z, V)
        cache.update(Z=Z, A=Z, O=O)
    else:
        S = tensor.matmul(K.T, V)
        O = tensor.matmul(Q, S) * scale
        cache.update(S=S, O=O)
    return LayerRecord(spec, x, O, cache)


def _forward_softmax_attention(
    spec: LayerSpec,
    params: Dict[str, np.ndarray],
    x: Matrix,
    keep: Optional[np.ndarray],
) -> LayerRecord:
    scale = 1.0 / math.sqrt(float(spec.get("d_k")))
    Q = tensor.matmul(x, params[spec.param("W_Q")])
    K = tensor.matmul(x, params[spec.param("W_K")])
    V = tensor.matmul(x, params[spec.param("W_V")])
    Z = tensor.matmul(Q, K.T) * scale
    A = tensor.softmax_rows(Z, keep)
    O = tensor.matmul(A, V)
    U = tensor.matmul(O, params[spec.param("W_O")])
    cache = {"Q": Q, "K": K, "V": V, "Z": Z, "A": A, "O": O, "U": U}
    return LayerRecord(spec, x, x + U, cache)


def _forward_feed_forward(
    spec: LayerSpec,
    params: Dict[str, np.ndarray],
    x: Matrix,
) -> LayerRecord:
    P = tensor.matmul(x, params[spec.param("W1")]) + params[spec.param("b1")]
    H = np.maximum(P, 0.0)
    F = tensor.matmul(H, params[spec.param("W2")]) + params[spec.param("b2")]
    return LayerRecord(spec, x, x + F, {"P": P, "H": H, "F": F})


def _forward_mean_pool(
    spec: LayerSpec,
    x: Matrix,
    keep: Optional[np.ndarray],
) -> LayerRecord:
    if keep is None:
        pooled = x.mean(axis=0, keepdims=True)
    elif keep.any():
        pooled = x[keep].mean(axis=0, keepdims=True)
    else:
        pooled = np.zeros((1, x.shape[1]))
    return LayerRecord(spec, x, pooled)


def forward(
    model: ModelGraph,
    x: Any,
    keep: Optional[Sequence[bool]] = None,
    pre_embedded: bool = False,
) -> ForwardTrace:
    """Run a model on one example and record every intermediate.

    Parameters
    ----------
    model : ModelGraph
        The model.
    x : array_like
        The example: an image (any shape with one entry per position) for
        pixel models, a sequence of token ids for token models, or a
        vector for models without an embedding. With `pre_embedded`, the
        ``T x d`` embedding rows instead.
    keep : Sequence of bool or None, optional
        Which positions take part. Positions that are not kept are
        excluded from every attention row (their columns are masked out
        and the rows renormalized) and from the pooling. ``None`` keeps
        everything.
    pre_embedded : bool, optional
        Whether `x` is already the output of the embedding layer.

    Returns
    -------
    trace : ForwardTrace

    Raises
    ------
    ShapeError
        If `x` or `keep` does not match the model.

    """
    if not isinstance(model, ModelGraph):
        raise TypeError("model must be a ModelGraph.")
    params = model._params
    keep_mask: Optional[np.ndarray] = None
    if keep is not None:
        keep_mask = np.asarray(keep, dtype=bool).reshape(-1)
        if keep_mask.shape[0] != model.num_features:
            raise ShapeError(
                f"keep has {keep_mask.shape[0]} entries, the model has "
                f"{model.num_features} positions.",
            )
    records: List[LayerRecord] = []
    h: Optional[np.ndarray] = None
    for spec in model.layers:
        kind = spec.kind
        if kind == "embedding":
            rec = _forward_embedding(spec, params, x, pre_embedded)
        else:
            if h is None:
                h = tensor.as_matrix(x, "input")
                if h.shape != (1, spec.d_in):
                    raise ShapeError(
                        f"Input must have {spec.d_in} entries, got {h.shape}.",
                    )
            if kind in ("linear", "classifier"):
                out = tensor.matmul(h, params[spec.param("W")])
                if spec.param("b") in params:
                    out = out + params[spec.param("b")]
                rec = LayerRecord(spec, h, out)
            elif kind == "relu":
                rec = LayerRecord(spec, h, np.maximum(h, 0.0))
            elif kind == "linear_attention":
                rec = _forward_linear_attention(spec, params, h, keep_mask)
            elif kind == "softmax_attention":
                rec = _forward_softmax_attention(spec, params, h, keep_mask)
            elif kind == "feed_forward":
                rec = _forward_feed_forward(spec, params, h)
            else:
                rec = _forward_mean_pool(spec, h, keep_mask)
        records.append(rec)
        h = rec.output
    if records[-1].output.shape[0] != 1:
        raise ShapeError("The last layer must produce a single row of logits.")
    return ForwardTrace(model, np.asarray(x), keep_mask, records)


def logits(
    model: ModelGraph,
    x: Any,
    keep: Optional[Sequence[bool]] = None,
    pre_embedded: bool = False,
) -> np.ndarray:
    """Shortcut for ``forward(...).logits``."""
    return forward(model, x, keep, pre_embedded).logits


def check_trace(trace: ForwardTrace, tol: float = 1e-9) -> None:
    """Verify the internal consistency of a trace.

    For softmax attention ``A == softmax_rows(Z)`` and ``O == A V``; for
    linear attention ``O`` must equal both ``(Q K^T / sqrt(d_k)) V`` and
    ``Q (K^T V) / sqrt(d_k)``.

    Parameters
    ----------
    trace : ForwardTrace
    tol : float, optional
        Tolerance, relative to the largest magnitude involved.

    Raises
    ------
    ValueError
        If a check fails.

    """
    for rec in trace.attention_records():
        c = rec.cache
        if rec.spec.kind == "softmax_attention":
            checks = [
                ("A", tensor.softmax_rows(c["Z"], trace.keep), c["A"]),
                ("O", c["A"] @ c["V"], c["O"]),
            ]
        else:
            scale = 1.0 / math.sqrt(float(rec.spec.get("d_k")))
            checks = [
                ("O", ((c["Q"] @ c["K"].T) * scale) @ c["V"], c["O"]),
                ("O", (c["Q"] @ (c["K"].T @ c["V"])) * scale, c["O"]),
            ]
        for what, expected, actual in checks:
            magnitude = max(1.0, float(np.max(np.abs(expected))))
            err = float(np.max(np.abs(expected - actual)))
            if err > tol * magnitude:
                raise ValueError(
                    f"Layer {rec.spec.name!r}: {what} is off by {err:g}.",
                )


def _uniform(rng: np.random.Generator, fan_in: int, shape: Tuple[int, ...]) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_params(layers: Sequence[LayerSpec], seed: int) -> Dict[str, np.ndarray]:
    """Seeded initialization for a list of layers.

    Weights are drawn from ``uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))``
    and biases start at zero. Pixel embeddings have a fan in of one.
    Token and position embeddings use the model width as fan in.

    Parameters
    ----------
    layers : Sequence of LayerSpec
    seed : int

    Returns
    -------
    params : dict

    """
    rng = np.random.default_rng(seed)
    params: Dict[str, np.ndarray] = {}
    for spec in layers:
        for name, shape in _expected_param_shapes(spec).items():
            suffix = name[len(spec.name) + 1 :]
            if suffix.startswith("b"):
                params[name] = np.zeros(shape)
            elif suffix in ("E", "P"):
                params[name] = _uniform(rng, spec.d_out, shape)
            elif spec.kind == "embedding":
                params[name] = _uniform(rng, 1, shape)
            else:
                params[name] = _uniform(rng, shape[0], shape)
    return params


def qkv_layers(
    order: AttentionOrder,
    seq_len: int = 196,
    d_model: int = 32,
    num_classes: int = 10,
) -> List[LayerSpec]:
    """Layers of the linear attention pixel classifier.

    A per-position pixel embedding, a linear attention layer without
    softmax in the given grouping, mean pooling and a linear output
    layer.

    """
    return [
        LayerSpec("embedding", "embed", mode="pixel", seq_len=seq_len, d_in=1, d_out=d_model),
        LayerSpec(
            "linear_attention",
            "attn1",
            order=order,
            d_in=d_model,
            d_out=d_model,
            d_k=d_model,
            index=1,
        ),
        LayerSpec("mean_pool", "pool", d_in=d_model, d_out=d_model),
        LayerSpec("classifier", "out", d_in=d_model, d_out=num_classes),
    ]


def build_qkv_pair(
    params: Mapping[str, np.ndarray],
    seq_len: int = 196,
    d_model: int = 32,
    num_classes: int = 10,
) -> Tuple[ModelGraph, ModelGraph]:
    """Build both groupings of the linear attention network.

    Parameters
    ----------
    params : Mapping
        Shared parameters (``embed.W``, ``attn1.W_Q``, ``attn1.W_K``,
        ``attn1.W_V``, ``out.W``, ``out.b``).
    seq_len, d_model, num_classes : int, optional
        Shape of the network.

    Returns
    -------
    av_first, kv_first : ModelGraph
        Identical parameters. The first computes ``(Q K^T) V`` and the
        second ``Q (K^T V)``.

    """
    return (
        ModelGraph(qkv_layers("av_first", seq_len, d_model, num_classes), params),
        ModelGraph(qkv_layers("kv_first", seq_len, d_model, num_classes), params),
    )


def build_qkv(
    order: AttentionOrder,
    seed: int,
    seq_len: int = 196,
    d_model: int = 32,
    num_classes: int = 10,
) -> ModelGraph:
    """Freshly initialized linear attention network."""
    layers = qkv_layers(order, seq_len, d_model, num_classes)
    return ModelGraph(layers, init_params(layers, seed))


def regroup(model: ModelGraph, order: AttentionOrder) -> ModelGraph:
    """The same linear attention network in the other grouping."""
    layers = []
    for spec in model.layers:
        if spec.kind == "linear_attention":
            shape = spec.shape
            shape["order"] = order
            spec = LayerSpec(spec.kind, spec.name, **shape)
        layers.append(spec)
    return model.with_layers(layers)


def encoder_layers(
    vocab_size: int,
    seq_len: int,
    num_classes: int,
    n_layers: int = 6,
    d_model: int = 32,
    d_hidden: int = 64,
) -> List[LayerSpec]:
    """Layers of the softmax attention encoder.

    Token plus learned position embedding, then `n_layers` blocks of
    single head softmax attention and a ReLU feed-forward block (both
    with residual connections), mean pooling and a linear classifier.

    """
    layers = [
        LayerSpec(
            "embedding",
            "embed",
            mode="token",
            vocab_size=vocab_size,
            seq_len=seq_len,
            d_in=1,
            d_out=d_model,
        ),
    ]
    for i in range(1, n_layers + 1):
        layers.append(
            LayerSpec(
                "softmax_attention",
                f"attn{i}",
                d_in=d_model,
                d_out=d_model,
                d_k=d_model,
                index=i,
            ),
        )
        layers.append(
            LayerSpec(
                "feed_forward",
                f"ffn{i}",
                d_in=d_model,
                d_out=d_model,
                d_hidden=d_hidden,
            ),
        )
    layers.append(LayerSpec("mean_pool", "pool", d_in=d_model, d_out=d_model))
    layers.append(LayerSpec("classifier", "out", d_in=d_model, d_out=num_classes))
    return layers


def build_encoder(
    vocab_size: int,
    seq_len: int,
    num_classes: int,
    seed: int,
    n_layers: int = 6,
    d_model: int = 32,
    d_hidden: int = 64,
) -> ModelGraph:
    """Freshly initialized softmax attention encoder."""
    layers = encoder_layers(vocab_size, seq_len, num_classes, n_layers, d_model, d_hidden)
    return ModelGraph(layers, init_params(layers, seed))


def build_linear(
    weights: Sequence[np.ndarray],
    biases: Optional[Sequence[Optional[np.ndarray]]] = None,
) -> ModelGraph:
    """A stack of linear layers acting on a row vector.

    Parameters
    ----------
    weights : Sequence of numpy.ndarray
        ``d_in x d_out`` weight of each layer.
    biases : Sequence of numpy.ndarray or None, optional
        Bias of each layer, or ``None`` entries for no bias.

    Returns
    -------
    model : ModelGraph

    """
    if biases is None:
        biases = [None] * len(weights)
    layers = []
    params: Dict[str, np.ndarray] = {}
    for i, (w, b) in enumerate(zip(weights, biases)):
        w = tensor.as_matrix(w, "weight")
        spec = LayerSpec(
            "linear",
            f"lin{i + 1}",
            d_in=w.shape[0],
            d_out=w.shape[1],
            bias=b is not None,
        )
        params[spec.param("W")] = w
        if b is not None:
            params[spec.param("b")] = np.asarray(b, dtype=np.float64).reshape(1, -1)
        layers.append(spec)
    return ModelGraph(layers, params)


class ScalarTrace:
    """Forward pass of a :py:class:`ScalarChain`.

    Attributes
    ----------
    order : {'left', 'right'}
    inputs : numpy.ndarray
        ``(x1, x2, x3)``.
    h : float
        The inner product, ``x1 * x2`` for ``'left'`` and ``x2 * x3`` for
        ``'right'``.
    y : float
        The output.

    """

    __slots__ = ("order", "inputs", "h", "y")

    def __init__(self: "ScalarTrace", order: str, inputs: np.ndarray) -> None:
        self.order = order
        self.inputs = inputs
        x1, x2, x3 = (float(v) for v in inputs)
        if order == "left":
            self.h = x1 * x2
            self.y = self.h * x3
        else:
            self.h = x2 * x3
            self.y = x1 * self.h

    @property
    def logits(self: "ScalarTrace") -> np.ndarray:
        """numpy.ndarray: ``[y]``, so that the output is logit 0."""
        return np.array([self.y])


class ScalarChain:
    """The product ``x1 * x2 * x3`` as two multiplication nodes.

    Parameters
    ----------
    order : {'left', 'right'}
        ``'left'`` computes ``(x1 * x2) * x3`` and ``'right'`` computes
        ``x1 * (x2 * x3)``.

    """

    feature_kind = "scalar"
    num_features = 3
    num_classes = 1

    def __init__(self: "ScalarChain", order: ChainOrder) -> None:
        if order not in ("left", "right"):
            raise ValueError("order must be 'left' or 'right'.")
        self.order = order

    def forward(self: "ScalarChain", x: Sequence[float]) -> ScalarTrace:
        """Evaluate on ``(x1, x2, x3)``."""
        values = np.asarray(x, dtype=np.float64).reshape(-1)
        if values.shape != (3,):
            raise ShapeError("A scalar chain takes exactly three inputs.")
        if not np.all(np.isfinite(values)):
            raise ValueError("inputs must be finite.")
        return ScalarTrace(self.order, values)


def scalar_chain(order: ChainOrder, x1: float, x2: float, x3: float) -> ScalarTrace:
    """Trace of ``x1 * x2 * x3`` grouped as `order`."""
    return ScalarChain(order).forward([x1, x2, x3])


def embed(model: ModelGraph, x: Any) -> Matrix:
    """Output of the model's embedding layer for one example.

    For token models this is the token plus position embedding rows
    that :py:func:`forward` accepts with ``pre_embedded=True``.

    Raises
    ------
    ValueError
        If the model has no embedding layer.

    """
    spec = model.layers[0]
    if spec.kind != "embedding":
        raise ValueError("The model has no embedding layer.")
    return _forward_embedding(spec, model._params, x, False).output
