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

"""Module for the experiment configuration.

An :py:class:`ExperimentConfig` holds every setting of a run. It is read
from JSON, overridden by command line flags, snapshotted into the run
directory and identified by a digest of its canonical JSON form.

"""

import hashlib
import json
import math
from typing import Any, Dict, Mapping, Optional

from .exceptions import ConfigError
from .explain import ABLATION_FAMILIES, AblationPlan, ablation_configs
from .metrics import parse_removal_unit
from .relprop import RuleConfig, uniform_rules
from .train import TrainConfig

MODELS = ("qkv", "encoder")
IG_BASELINES = ("zero",)

# Settings that do not influence results and stay out of the digest.
_NOT_DIGESTED = ("data_dir", "checkpoint_dir", "output_dir", "progress")


def _check_int(name: str, value: Any, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise TypeError(f"{name} must be an int.")
    if value < minimum:
        raise ConfigError(f"{name} must be at least {minimum}, got {value}.")
    return int(value)


def _check_float(name: str, value: Any, low: float, high: float = math.inf, open_low: bool = True) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TypeError(f"{name} must be a number.")
    value = float(value)
    too_low = value <= low if open_low else value < low
    if too_low or not value < high or not math.isfinite(value):
        bracket = "(" if open_low else "["
        raise ConfigError(f"{name} must be in {bracket}{low}, {high}), got {value}.")
    return value


def _check_str(name: str, value: Any) -> str:
    if not isinstance(value, str):
        raise TypeError(f"{name} must be str.")
    return value


def _check_choice(name: str, value: Any, choices: Any) -> str:
    if _check_str(name, value) not in choices:
        raise ConfigError(f"{name} must be one of {', '.join(choices)}, got {value!r}.")
    return value


class ExperimentConfig:
    """Settings of an experiment run.

    Every option is a property whose setter validates the new value.
    The constructor takes the options as keywords, the rest keep their
    defaults.

    Parameters
    ----------
    **options :
        Option values. See Attributes.

    Raises
    ------
    ConfigError
        If an option is unknown or a value is out of range.
    TypeError
        If a value has the wrong type.

    Attributes
    ----------
    data_dir : str
    checkpoint_dir : str
    output_dir : str
    model : {'qkv', 'encoder'}
    seed : int
    epsilon : float
    ig_steps : int
    ig_baseline : {'zero'}
    rollout_residual : bool
    removal_unit : str
    eval_n : int
    ablation_family : str or None
    ablation_k : int or None
    lr : float
    beta1 : float
    beta2 : float
    adam_eps : float
    epochs : int
    encoder_epochs : int
    batch_size : int
    train_limit : int or None
    vocab_size : int
    seq_len : int
    num_classes : int
    n_synthetic : int
    n_layers : int
    d_model : int
    d_hidden : int
    progress : bool

    """

    def __init__(self: "ExperimentConfig", **options: Any) -> None:
        self._data_dir = "data"
        self._checkpoint_dir = "checkpoints"
        self._output_dir = "runs"
        self._model = "encoder"
        self._seed = 0
        self._epsilon = 1e-6
        self._ig_steps = 50
        self._ig_baseline = "zero"
        self._rollout_residual = False
        self._removal_unit = "feature"
        self._eval_n = 200
        self._ablation_family: Optional[str] = None
        self._ablation_k: Optional[int] = None
        self._lr = 0.001
        self._beta1 = 0.9
        self._beta2 = 0.999
        self._adam_eps = 1e-8
        self._epochs = 5
        self._encoder_epochs = 20
        self._batch_size = 64
        self._train_limit: Optional[int] = None
        self._vocab_size = 24
        self._seq_len = 16
        self._num_classes = 4
        self._n_synthetic = 3000
        self._n_layers = 6
        self._d_model = 32
        self._d_hidden = 64
        self._progress = True
        self.update(options)

    @classmethod
    def option_names(cls: "type[ExperimentConfig]") -> tuple:
        """Names of all options, in a fixed order."""
        return tuple(k for k, v in vars(cls).items() if isinstance(v, property) and k != "digest")

    def update(self: "ExperimentConfig", options: Mapping[str, Any]) -> "ExperimentConfig":
        """Set several options at once. ``None`` values are skipped.

        Returns
        -------
        self : ExperimentConfig

        """
        names = self.option_names()
        for key, value in options.items():
            if key not in names:
                raise ConfigError(f"Unknown option {key!r}.")
            if value is not None:
                setattr(self, key, value)
        if self._vocab_size < self._num_classes + 2:
            raise ConfigError("vocab_size must be at least num_classes + 2.")
        return self

    @property
    def data_dir(self: "ExperimentConfig") -> str:
        """Directory of the MNIST IDX files.

        str

        """
        return self._data_dir

    @data_dir.setter
    def data_dir(self: "ExperimentConfig", value: str) -> None:
        self._data_dir = _check_str("data_dir", value)

    @property
    def checkpoint_dir(self: "ExperimentConfig") -> str:
        """Directory where checkpoints and dataset caches go.

        str

        """
        return self._checkpoint_dir

    @checkpoint_dir.setter
    def checkpoint_dir(self: "ExperimentConfig", value: str) -> None:
        self._checkpoint_dir = _check_str("checkpoint_dir", value)

    @property
    def output_dir(self: "ExperimentConfig") -> str:
        """Directory under which run directories are made.

        str

        """
        return self._output_dir

    @output_dir.setter
    def output_dir(self: "ExperimentConfig", value: str) -> None:
        self._output_dir = _check_str("output_dir", value)

    @property
    def model(self: "ExperimentConfig") -> str:
        """Which model ``train``, ``explain`` and ``eval`` work on.

        {'qkv', 'encoder'}

        ``'qkv'`` is the linear attention pixel classifier, ``'encoder'``
        (default) the softmax attention encoder of the keyword task.

        """
        return self._model

    @model.setter
    def model(self: "ExperimentConfig", value: str) -> None:
        self._model = _check_choice("model", value, MODELS)

    @property
    def seed(self: "ExperimentConfig") -> int:
        """Seed of every random stream.

        int

        """
        return self._seed

    @seed.setter
    def seed(self: "ExperimentConfig", value: int) -> None:
        self._seed = _check_int("seed", value, 0)

    @property
    def epsilon(self: "ExperimentConfig") -> float:
        """Stabilizer of the relevance rules.

        float

        Positive, default ``1e-6``.

        """
        return self._epsilon

    @epsilon.setter
    def epsilon(self: "ExperimentConfig", value: float) -> None:
        self._epsilon = _check_float("epsilon", value, 0.0)

    @property
    def ig_steps(self: "ExperimentConfig") -> int:
        """Midpoints of the integrated gradients quadrature.

        int

        At least 8, default 50.

        """
        return self._ig_steps

    @ig_steps.setter
    def ig_steps(self: "ExperimentConfig", value: int) -> None:
        self._ig_steps = _check_int("ig_steps", value, 8)

    @property
    def ig_baseline(self: "ExperimentConfig") -> str:
        """Baseline of integrated gradients.

        {'zero'}

        """
        return self._ig_baseline

    @ig_baseline.setter
    def ig_baseline(self: "ExperimentConfig", value: str) -> None:
        self._ig_baseline = _check_choice("ig_baseline", value, IG_BASELINES)

    @property
    def rollout_residual(self: "ExperimentConfig") -> bool:
        """Whether rollout mixes in the identity for residual connections.

        bool

        """
        return self._rollout_residual

    @rollout_residual.setter
    def rollout_residual(self: "ExperimentConfig", value: bool) -> None:
        if not isinstance(value, bool):
            raise TypeError("rollout_residual must be bool.")
        self._rollout_residual = value

    @property
    def removal_unit(self: "ExperimentConfig") -> str:
        """What a perturbation step removes.

        str

        ``'feature'`` (default) or ``'chunk:N'`` for N contiguous
        features.

        """
        return self._removal_unit

    @removal_unit.setter
    def removal_unit(self: "ExperimentConfig", value: str) -> None:
        try:
            parse_removal_unit(_check_str("removal_unit", value))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        self._removal_unit = value

    @property
    def eval_n(self: "ExperimentConfig") -> int:
        """Examples per evaluation suite.

        int

        Default 200.

        """
        return self._eval_n

    @eval_n.setter
    def eval_n(self: "ExperimentConfig", value: int) -> None:
        self._eval_n = _check_int("eval_n", value, 1)

    @property
    def ablation_family(self: "ExperimentConfig") -> Optional[str]:
        """Ablation family of the ``'ablation'`` explainer.

        str or None

        ``'front_to_back'``, ``'back_to_front'`` or ``'single'``.

        """
        return self._ablation_family

    @ablation_family.setter
    def ablation_family(self: "ExperimentConfig", value: Optional[str]) -> None:
        self._ablation_family = (
            None if value is None else _check_choice("ablation_family", value, ABLATION_FAMILIES)
        )

    @property
    def ablation_k(self: "ExperimentConfig") -> Optional[int]:
        """Layer count or index of the ablation plan.

        int or None

        """
        return self._ablation_k

    @ablation_k.setter
    def ablation_k(self: "ExperimentConfig", value: Optional[int]) -> None:
        self._ablation_k = None if value is None else _check_int("ablation_k", value, 1)

    @property
    def lr(self: "ExperimentConfig") -> float:
        """Adam learning rate.

        float

        """
        return self._lr

    @lr.setter
    def lr(self: "ExperimentConfig", value: float) -> None:
        self._lr = _check_float("lr", value, 0.0, open_low=False)

    @property
    def beta1(self: "ExperimentConfig") -> float:
        """Adam first moment decay.

        float

        """
        return self._beta1

    @beta1.setter
    def beta1(self: "ExperimentConfig", value: float) -> None:
        self._beta1 = _check_float("beta1", value, 0.0, 1.0, open_low=False)

    @property
    def beta2(self: "ExperimentConfig") -> float:
        """Adam second moment decay.

        float

        """
        return self._beta2

    @beta2.setter
    def beta2(self: "ExperimentConfig", value: float) -> None:
        self._beta2 = _check_float("beta2", value, 0.0, 1.0, open_low=False)

    @property
    def adam_eps(self: "ExperimentConfig") -> float:
        """Adam denominator offset.

        float

        """
        return self._adam_eps

    @adam_eps.setter
    def adam_eps(self: "ExperimentConfig", value: float) -> None:
        self._adam_eps = _check_float("adam_eps", value, 0.0)

    @property
    def epochs(self: "ExperimentConfig") -> int:
        """Training epochs of the linear attention network.

        int

        """
        return self._epochs

    @epochs.setter
    def epochs(self: "ExperimentConfig", value: int) -> None:
        self._epochs = _check_int("epochs", value, 0)

    @property
    def encoder_epochs(self: "ExperimentConfig") -> int:
        """Training epochs of the encoder.

        int

        """
        return self._encoder_epochs

    @encoder_epochs.setter
    def encoder_epochs(self: "ExperimentConfig", value: int) -> None:
        self._encoder_epochs = _check_int("encoder_epochs", value, 0)

    @property
    def batch_size(self: "ExperimentConfig") -> int:
        """Examples per Adam update.

        int

        """
        return self._batch_size

    @batch_size.setter
    def batch_size(self: "ExperimentConfig", value: int) -> None:
        self._batch_size = _check_int("batch_size", value, 1)

    @property
    def train_limit(self: "ExperimentConfig") -> Optional[int]:
        """Cap on the number of training examples.

        int or None

        ``None`` (default) trains on everything.

        """
        return self._train_limit

    @train_limit.setter
    def train_limit(self: "ExperimentConfig", value: Optional[int]) -> None:
        self._train_limit = None if value is None else _check_int("train_limit", value, 1)

    @property
    def vocab_size(self: "ExperimentConfig") -> int:
        """Vocabulary size of the keyword task.

        int

        """
        return self._vocab_size

    @vocab_size.setter
    def vocab_size(self: "ExperimentConfig", value: int) -> None:
        self._vocab_size = _check_int("vocab_size", value, 4)

    @property
    def seq_len(self: "ExperimentConfig") -> int:
        """Sequence length of the keyword task.

        int

        """
        return self._seq_len

    @seq_len.setter
    def seq_len(self: "ExperimentConfig", value: int) -> None:
        self._seq_len = _check_int("seq_len", value, 4)

    @property
    def num_classes(self: "ExperimentConfig") -> int:
        """Classes (and keywords) of the keyword task.

        int

        """
        return self._num_classes

    @num_classes.setter
    def num_classes(self: "ExperimentConfig", value: int) -> None:
        self._num_classes = _check_int("num_classes", value, 2)

    @property
    def n_synthetic(self: "ExperimentConfig") -> int:
        """Sequences generated for the keyword task (80/20 split).

        int

        """
        return self._n_synthetic

    @n_synthetic.setter
    def n_synthetic(self: "ExperimentConfig", value: int) -> None:
        self._n_synthetic = _check_int("n_synthetic", value, 10)

    @property
    def n_layers(self: "ExperimentConfig") -> int:
        """Attention layers of the encoder.

        int

        """
        return self._n_layers

    @n_layers.setter
    def n_layers(self: "ExperimentConfig", value: int) -> None:
        self._n_layers = _check_int("n_layers", value, 1)

    @property
    def d_model(self: "ExperimentConfig") -> int:
        """Model width.

        int

        """
        return self._d_model

    @d_model.setter
    def d_model(self: "ExperimentConfig", value: int) -> None:
        self._d_model = _check_int("d_model", value, 1)

    @property
    def d_hidden(self: "ExperimentConfig") -> int:
        """Hidden width of the encoder's feed-forward blocks.

        int

        """
        return self._d_hidden

    @d_hidden.setter
    def d_hidden(self: "ExperimentConfig", value: int) -> None:
        self._d_hidden = _check_int("d_hidden", value, 1)

    @property
    def progress(self: "ExperimentConfig") -> bool:
        """Whether to show progress bars.

        bool

        """
        return self._progress

    @progress.setter
    def progress(self: "ExperimentConfig", value: bool) -> None:
        if not isinstance(value, bool):
            raise TypeError("progress must be bool.")
        self._progress = value

    def to_dict(self: "ExperimentConfig") -> Dict[str, Any]:
        """All options as a JSON-ready dict."""
        return {name: getattr(self, name) for name in self.option_names()}

    @classmethod
    def from_dict(cls: "type[ExperimentConfig]", d: Mapping[str, Any]) -> "ExperimentConfig":
        """Make a configuration from a dict of options."""
        return cls(**dict(d))

    def to_json(self: "ExperimentConfig", path: str) -> None:
        """Write the options as indented JSON with sorted keys."""
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def from_json(cls: "type[ExperimentConfig]", path: str) -> "ExperimentConfig":
        """Read a configuration written by :py:meth:`to_json` (or by hand).

        Raises
        ------
        ConfigError
            If the file is not a JSON object of known options.
        OSError
            If the file cannot be read.

        """
        with open(path, encoding="utf-8") as f:
            try:
                d = json.load(f)
            except ValueError as exc:
                raise ConfigError(f"{path!r} is not valid JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError(f"{path!r} must hold a JSON object.")
        return cls.from_dict(d)

    @property
    def digest(self: "ExperimentConfig") -> str:
        """SHA-256 of the canonical JSON of the result-relevant options."""
        d = {k: v for k, v in self.to_dict().items() if k not in _NOT_DIGESTED}
        canonical = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def train_config(self: "ExperimentConfig", epochs: Optional[int] = None) -> TrainConfig:
        """The optimizer settings (`epochs` by default)."""
        return TrainConfig(
            lr=self._lr,
            beta1=self._beta1,
            beta2=self._beta2,
            adam_eps=self._adam_eps,
            epochs=self._epochs if epochs is None else epochs,
            batch_size=self._batch_size,
            seed=self._seed,
            progress=self._progress,
        )

    def ablation_plan(self: "ExperimentConfig", n_layers: Optional[int] = None) -> Optional[AblationPlan]:
        """The configured ablation plan, if any.

        Raises
        ------
        ConfigError
            If only one of `ablation_family` and `ablation_k` is set or `k`
            is out of range.

        """
        if self._ablation_family is None and self._ablation_k is None:
            return None
        if self._ablation_family is None or self._ablation_k is None:
            raise ConfigError("ablation_family and ablation_k must be set together.")
        try:
            return AblationPlan(
                self._ablation_family,
                self._ablation_k,
                self._n_layers if n_layers is None else n_layers,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def explain_settings(self: "ExperimentConfig", n_layers: Optional[int] = None) -> Dict[str, Any]:
        """Settings for :py:func:`lrplab.explain.explain`."""
        settings: Dict[str, Any] = {
            "epsilon": self._epsilon,
            "ig_steps": self._ig_steps,
            "ig_baseline": None,
            "rollout_residual": self._rollout_residual,
            "seed": self._seed,
            "digest": self.digest,
        }
        plan = self.ablation_plan(n_layers)
        if plan is not None:
            settings["plan"] = plan
        return settings

    def rule_config(self: "ExperimentConfig", method: str, n_layers: int) -> RuleConfig:
        """The relevance rules that `method` applies to `n_layers` layers.

        Raises
        ------
        ConfigError
            If `method` is not a relevance method, or is ``'ablation'``
            without a configured plan.

        """
        if method == "attnlrp":
            return default_rules(n_layers, self._epsilon)
        if method == "cplrp":
            return uniform_rules(n_layers, "cplrp", self._epsilon)
        if method == "ablation":
            plan = self.ablation_plan(n_layers)
            if plan is None:
                raise ConfigError("method 'ablation' needs ablation_family and ablation_k.")
            return ablation_configs(plan, n_layers, self._epsilon)
        raise ConfigError(f"{method!r} does not propagate relevance.")

    def __eq__(self: "ExperimentConfig", other: object) -> bool:
        return isinstance(other, ExperimentConfig) and self.to_dict() == other.to_dict()

    def __repr__(self: "ExperimentConfig") -> str:
        return f"ExperimentConfig(**{self.to_dict()!r})"


def rules_to_json(cfg: RuleConfig) -> str:
    """Serialize a rule configuration."""
    return json.dumps(cfg.to_dict(), sort_keys=True)


def rules_from_json(s: str) -> RuleConfig:
    """Inverse of :py:func:`rules_to_json`.

    Raises
    ------
    ConfigError
        If `s` is not a valid rule configuration.

    """
    try:
        return RuleConfig.from_dict(json.loads(s))
    except (ValueError, TypeError, AttributeError) as exc:
        raise ConfigError(f"Invalid rule configuration: {exc}") from exc


def plan_to_json(plan: AblationPlan) -> str:
    """Serialize an ablation plan."""
    return json.dumps(plan.to_dict(), sort_keys=True)


def plan_from_json(s: str) -> AblationPlan:
    """Inverse of :py:func:`plan_to_json`.

    Raises
    ------
    ConfigError
        If `s` is not a valid plan.

    """
    try:
        return AblationPlan.from_dict(json.loads(s))
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"Invalid ablation plan: {exc}") from exc


def default_rules(n_layers: int, epsilon: float = 1e-6) -> RuleConfig:
    """Full bilinear and softmax treatment at every attention layer."""
    return uniform_rules(n_layers, "attnlrp", epsilon)
