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

"""Module for training.

Models are trained with Adam on the softmax cross-entropy of their
logits. Gradients are averaged over minibatches of examples that are
run one at a time. Everything random (initialization and shuffling)
comes from generators derived from a single seed, so equal seeds and
configurations give bit-identical parameters.

"""

import logging
import math
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from . import autodiff
from . import model as _model
from .dataio import Dataset
from .exceptions import DivergenceError, ShapeError
from .model import ModelGraph

logger = logging.getLogger(__name__)


class TrainConfig:
    """Optimizer and schedule settings.

    Parameters
    ----------
    lr : float, optional
        Learning rate, nonnegative. Default ``0.001``.
    beta1, beta2 : float, optional
        Moment decay rates in ``[0, 1)``. Defaults ``0.9`` and ``0.999``.
    adam_eps : float, optional
        Positive denominator offset. Default ``1e-8``.
    epochs : int, optional
        Passes over the data. Default 5.
    batch_size : int, optional
        Examples per update. Default 64.
    seed : int, optional
        Seed of the initialization and shuffling streams. Default 0.
    progress : bool, optional
        Whether to show progress bars. Default ``True``.

    Raises
    ------
    ValueError
        If a setting is out of range.

    """

    __slots__ = ("lr", "beta1", "beta2", "adam_eps", "epochs", "batch_size", "seed", "progress")

    def __init__(
        self: "TrainConfig",
        lr: float = 0.001,
        beta1: float = 0.9,
        beta2: float = 0.999,
        adam_eps: float = 1e-8,
        epochs: int = 5,
        batch_size: int = 64,
        seed: int = 0,
        progress: bool = True,
    ) -> None:
        if not lr >= 0.0:
            raise ValueError("lr must be nonnegative.")
        for name, beta in (("beta1", beta1), ("beta2", beta2)):
            if not 0.0 <= beta < 1.0:
                raise ValueError(f"{name} must be in [0, 1).")
        if not adam_eps > 0.0:
            raise ValueError("adam_eps must be positive.")
        if epochs < 0:
            raise ValueError("epochs must be nonnegative.")
        if batch_size < 1:
            raise ValueError("batch_size must be positive.")
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.adam_eps = float(adam_eps)
        self.epochs = int(epochs)
        self.batch_size = int(batch_size)
        self.seed = int(seed)
        self.progress = bool(progress)

    def to_dict(self: "TrainConfig") -> Dict[str, Any]:
        """JSON-ready settings (without `progress`)."""
        return {
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "adam_eps": self.adam_eps,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "seed": self.seed,
        }


def seed_streams(seed: int) -> Tuple[int, np.random.Generator]:
    """Independent initialization seed and shuffling generator for `seed`."""
    init_seq, shuffle_seq = np.random.SeedSequence(seed).spawn(2)
    return int(init_seq.generate_state(1)[0]), np.random.default_rng(shuffle_seq)


class AdamState:
    """First and second moment estimates of every parameter.

    Parameters
    ----------
    params : Mapping of str to numpy.ndarray
        Parameters whose shapes the moments take.

    Attributes
    ----------
    m, v : dict
        Moment estimates, zero initially.
    t : int
        Number of steps taken.

    """

    def __init__(self: "AdamState", params: Mapping[str, np.ndarray]) -> None:
        self.m: Dict[str, np.ndarray] = {k: np.zeros_like(p, dtype=np.float64) for k, p in params.items()}
        self.v: Dict[str, np.ndarray] = {k: np.zeros_like(p, dtype=np.float64) for k, p in params.items()}
        self.t = 0


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    cfg: TrainConfig,
) -> Dict[str, np.ndarray]:
    """One Adam update with bias correction.

    `state` is updated in place.

    Returns
    -------
    params : dict
        New parameter arrays.

    Raises
    ------
    ValueError
        If a gradient's shape differs from its parameter's.

    """
    state.t += 1
    t = state.t
    correction1 = 1.0 - cfg.beta1**t
    correction2 = 1.0 - cfg.beta2**t
    updated = {}
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.shape:
            raise ValueError(f"Gradient of {name!r} has shape {g.shape}, expected {p.shape}.")
        m = cfg.beta1 * state.m[name] + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * state.v[name] + (1.0 - cfg.beta2) * g * g
        state.m[name] = m
        state.v[name] = v
        m_hat = m / correction1
        v_hat = v / correction2
        updated[name] = p - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
    return updated


def evaluate_accuracy(model: ModelGraph, dataset: Dataset, progress: bool = False) -> float:
    """Share of examples whose largest logit is their label."""
    if len(dataset) == 0:
        raise ValueError("dataset is empty.")
    correct = 0
    for x, label in tqdm(dataset, total=len(dataset), desc="accuracy", disable=not progress):
        correct += int(np.argmax(_model.forward(model, x).logits) == label)
    return correct / len(dataset)


def train(
    model: ModelGraph,
    dataset: Dataset,
    cfg: Optional[TrainConfig] = None,
    test_set: Optional[Dataset] = None,
) -> Tuple[ModelGraph, List[Dict[str, Any]]]:
    """Train a model with Adam on cross-entropy.

    Parameters
    ----------
    model : ModelGraph
        The initial model. It is not modified.
    dataset : ImageDataset or SequenceDataset
        Training examples, shuffled every epoch.
    cfg : TrainConfig, optional
        Settings. The defaults if not given.
    test_set : ImageDataset or SequenceDataset, optional
        If given, its accuracy is recorded after every epoch.

    Returns
    -------
    model : ModelGraph
        The trained model.
    history : list of dict
        Per epoch ``epoch``, mean ``loss``, ``train_accuracy`` (counted
        during the epoch) and ``test_accuracy`` (NaN without
        `test_set`).

    Raises
    ------
    ValueError
        If `dataset` is empty.
    DivergenceError
        If the loss, an activation or a parameter stops being finite.

    """
    if cfg is None:
        cfg = TrainConfig()
    n = len(dataset)
    if n == 0:
        raise ValueError("dataset is empty.")
    _, rng = seed_streams(cfg.seed)
    params = model.params
    state = AdamState(params)
    history: List[Dict[str, Any]] = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        total_loss = 0.0
        correct = 0
        batches = range(0, n, cfg.batch_size)
        for step, start in enumerate(
            tqdm(batches, desc=f"epoch {epoch}", disable=not cfg.progress),
        ):
            batch = order[start : start + cfg.batch_size]
            grads = {k: np.zeros_like(p) for k, p in params.items()}
            batch_loss = 0.0
            for i in batch:
                x, label = dataset[int(i)]
                try:
                    trace = _model.forward(model, x)
                except ShapeError:
                    raise
                except ValueError as exc:
                    # Finite input but non-finite activations.
                    if not np.all(np.isfinite(np.asarray(x, dtype=np.float64))):
                        raise
                    raise DivergenceError(
                        f"Activations stopped being finite at epoch {epoch}, step {step}, "
                        f"example {int(i)}; lower the learning rate.",
                    ) from exc
                loss, d_logits = autodiff.cross_entropy(trace.logits, label)
                if not math.isfinite(loss):
                    raise DivergenceError(
                        f"Loss became {loss} at epoch {epoch}, step {step}, "
                        f"example {int(i)}; lower the learning rate.",
                    )
                batch_loss += loss
                correct += int(np.argmax(trace.logits) == label)
                for k, g in autodiff.backward_from(trace, d_logits).d_params.items():
                    grads[k] += g
            for k in grads:
                grads[k] /= len(batch)
            total_loss += batch_loss
            params = adam_step(params, grads, state, cfg)
            if not all(np.all(np.isfinite(p)) for p in params.values()):
                raise DivergenceError(
                    f"Parameters stopped being finite at epoch {epoch}, step {step}; "
                    "lower the learning rate.",
                )
            model = model.with_params(params)
        record = {
            "epoch": epoch,
            "loss": total_loss / n,
            "train_accuracy": correct / n,
            "test_accuracy": (
                evaluate_accuracy(model, test_set) if test_set is not None else float("nan")
            ),
        }
        logger.info(
            "epoch %d: loss %.4f, train accuracy %.4f, test accuracy %.4f",
            epoch,
            record["loss"],
            record["train_accuracy"],
            record["test_accuracy"],
        )
        history.append(record)
    return model, history


def train_shared_pair(
    cfg: TrainConfig,
    dataset: Dataset,
    test_set: Optional[Dataset] = None,
    d_model: int = 32,
) -> Tuple[ModelGraph, ModelGraph, List[Dict[str, Any]]]:
    """Train the linear attention network once and build both groupings.

    Training uses the ``'kv_first'`` grouping, the cheaper one for long
    sequences. The two returned graphs share the trained parameters.

    Returns
    -------
    av_first, kv_first : ModelGraph
    history : list of dict

    """
    images = getattr(dataset, "images", None)
    if images is None:
        raise TypeError("the linear attention network trains on images.")
    seq_len = int(np.prod(images.shape[1:]))
    init_seed, _ = seed_streams(cfg.seed)
    start = _model.build_qkv("kv_first", init_seed, seq_len, d_model, dataset.num_classes)
    trained, history = train(start, dataset, cfg, test_set)
    av_first, kv_first = _model.build_qkv_pair(
        trained.params,
        seq_len,
        d_model,
        dataset.num_classes,
    )
    return av_first, kv_first, history


def train_encoder(
    cfg: TrainConfig,
    dataset: Dataset,
    test_set: Optional[Dataset] = None,
    n_layers: int = 6,
    d_model: int = 32,
    d_hidden: int = 64,
) -> Tuple[ModelGraph, List[Dict[str, Any]]]:
    """Build and train the softmax attention encoder on a token dataset."""
    vocab_size = getattr(dataset, "vocab_size", None)
    if vocab_size is None:
        raise TypeError("the encoder trains on token sequences.")
    init_seed, _ = seed_streams(cfg.seed)
    start = _model.build_encoder(
        vocab_size,
        dataset.seq_len,
        dataset.num_classes,
        init_seed,
        n_layers,
        d_model,
        d_hidden,
    )
    return train(start, dataset, cfg, test_set)


def history_frame(history: List[Mapping[str, Any]]) -> pd.DataFrame:
    """Training history as a table, one row per epoch."""
    return pd.DataFrame(
        list(history),
        columns=["epoch", "loss", "train_accuracy", "test_accuracy"],
    )
