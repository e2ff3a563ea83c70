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

"""Module for faithfulness metrics.

* :py:func:`pearson` compares an attribution with the leave-one-out
  scores of the same example.
* :py:func:`perturbation_curve` removes features cumulatively, most
  relevant first (``'morf'``) or least relevant first (``'lerf'``), and
  records the target logit after each step.
* :py:func:`aopc` summarizes a curve by the mean logit over the removal
  steps, leaving out the unperturbed step 0. Lower is better for MoRF
  curves and higher is better for LeRF curves, and their difference
  ``LeRF - MoRF`` is reported as ``Δ``.

:py:func:`evaluate_suite` runs all of this over a dataset and
:py:func:`metrics_table` lays the result out as a table.

"""

import importlib
import logging
import sys
import warnings
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from .dataio import Dataset
from .exceptions import LrplabError
from .explain import AblationPlan, Attribution, Model

# The package re-exports the function ``explain``, which shadows the submodule.
_explain = importlib.import_module(".explain", __package__)

if sys.version_info >= (3, 8):
    from typing import Literal

    CurveOrder = Literal["morf", "lerf"]
else:
    CurveOrder = str

logger = logging.getLogger(__name__)

#: Column names of the metrics table after the label column.
TABLE_COLUMNS = ("LOO r", "LeRF", "MoRF", "Δ")

Method = Union[str, AblationPlan]


def pearson(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """Sample Pearson correlation.

    Parameters
    ----------
    x, y : Sequence of float
        Equal length, at least two entries.

    Returns
    -------
    r : float or None
        In ``[-1, 1]``. ``None`` (with a warning) when either vector is
        constant, since the correlation is then undefined.

    Raises
    ------
    ValueError
        If the lengths differ or are below two.

    """
    a = np.asarray(x, dtype=np.float64).reshape(-1)
    b = np.asarray(y, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"Lengths differ: {a.shape[0]} and {b.shape[0]}.")
    if a.shape[0] < 2:
        raise ValueError("Need at least two scores.")
    ac = a - a.mean()
    bc = b - b.mean()
    sa = float(np.sqrt(np.dot(ac, ac)))
    sb = float(np.sqrt(np.dot(bc, bc)))
    if sa == 0.0 or sb == 0.0 or np.ptp(a) == 0.0 or np.ptp(b) == 0.0:
        warnings.warn("Pearson correlation of a constant vector is undefined.", RuntimeWarning)
        return None
    r = float(np.dot(ac, bc)) / (sa * sb)
    return min(1.0, max(-1.0, r))


def parse_removal_unit(unit: str) -> int:
    """Features per removal step: 1 for ``'feature'``, N for ``'chunk:N'``.

    Raises
    ------
    ValueError
        If `unit` is malformed.

    """
    if unit == "feature":
        return 1
    if unit.startswith("chunk:"):
        try:
            size = int(unit[len("chunk:") :])
        except ValueError:
            size = 0
        if size >= 1:
            return size
    raise ValueError(f"removal unit must be 'feature' or 'chunk:N', got {unit!r}.")


def chunks(n: int, size: int) -> List[np.ndarray]:
    """Contiguous non overlapping groups of ``size`` indices (the last may be shorter)."""
    return [np.arange(start, min(start + size, n)) for start in range(0, n, size)]


class PerturbationCurve:
    """Target logit along a cumulative removal.

    Attributes
    ----------
    order : {'morf', 'lerf'}
    step_outputs : numpy.ndarray
        Logit after ``0..K`` removal steps, step 0 being the unperturbed
        example.
    removal_unit : str
    removal_order : numpy.ndarray
        Unit indices in the order they were removed.

    """

    __slots__ = ("order", "step_outputs", "removal_unit", "removal_order")

    def __init__(
        self: "PerturbationCurve",
        order: str,
        step_outputs: np.ndarray,
        removal_unit: str,
        removal_order: np.ndarray,
    ) -> None:
        self.order = order
        self.step_outputs = np.asarray(step_outputs, dtype=np.float64)
        self.removal_unit = removal_unit
        self.removal_order = np.asarray(removal_order, dtype=np.int64)

    @property
    def steps(self: "PerturbationCurve") -> int:
        """int: Number of removal steps ``K``."""
        return int(self.step_outputs.shape[0]) - 1


def removal_order(scores: np.ndarray, order: CurveOrder) -> np.ndarray:
    """Indices sorted by score, ties broken by ascending index."""
    scores = np.asarray(scores, dtype=np.float64)
    if order == "morf":
        return np.argsort(-scores, kind="stable")
    if order == "lerf":
        return np.argsort(scores, kind="stable")
    raise ValueError(f"order must be 'morf' or 'lerf', got {order!r}.")


def perturbation_curve(
    model: Model,
    x: Any,
    attribution: Union[Attribution, Sequence[float]],
    order: CurveOrder,
    removal_unit: str = "feature",
    target: Optional[int] = None,
    max_steps: Optional[int] = None,
) -> PerturbationCurve:
    """Remove features cumulatively in order of their scores.

    Removal is the same as for :py:func:`lrplab.explain.loo`. With chunks,
    a chunk's score is the sum of its members' scores.

    Parameters
    ----------
    model : ModelGraph or ScalarChain
    x : array_like
        The example.
    attribution : Attribution or Sequence of float
        One score per feature.
    order : {'morf', 'lerf'}
        Most relevant first or least relevant first.
    removal_unit : str, optional
        ``'feature'`` or ``'chunk:N'``.
    target : int, optional
        Logit to track. The predicted class by default.
    max_steps : int, optional
        Stop after this many steps. All units are removed by default.

    Returns
    -------
    curve : PerturbationCurve

    Raises
    ------
    ValueError
        If the scores do not cover every feature.

    """
    scores = attribution.scores if isinstance(attribution, Attribution) else attribution
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    n = int(model.num_features)
    if scores.shape[0] != n:
        raise ValueError(f"{scores.shape[0]} scores for {n} features.")
    if target is None:
        target = _explain.predicted_class(model, x)
    groups = chunks(n, parse_removal_unit(removal_unit))
    unit_scores = np.array([scores[g].sum() for g in groups])
    ordering = removal_order(unit_scores, order)
    n_steps = len(groups) if max_steps is None else min(int(max_steps), len(groups))
    outputs = np.empty(n_steps + 1)
    outputs[0] = float(_explain.target_logits(model, x)[target])
    drop = np.zeros(n, dtype=bool)
    for step in range(n_steps):
        drop[groups[ordering[step]]] = True
        outputs[step + 1] = _explain.score_without(model, x, drop, target)
    return PerturbationCurve(order, outputs, removal_unit, ordering[:n_steps])


def aopc(curve: Union[PerturbationCurve, Sequence[float]]) -> float:
    """Mean logit over the removal steps ``1..K``.

    Raises
    ------
    ValueError
        If the curve has no removal step.

    """
    outputs = curve.step_outputs if isinstance(curve, PerturbationCurve) else curve
    outputs = np.asarray(outputs, dtype=np.float64)
    if outputs.shape[0] < 2:
        raise ValueError("The curve has no removal step.")
    return float(outputs[1:].mean())


class MetricsRow:
    """Averages of one explainer over an evaluation set.

    Attributes
    ----------
    method : str
        Row label.
    loo_r : float or None
        Mean Pearson correlation with LOO, ``None`` if undefined for
        every example.
    lerf, morf : float
        Mean AOPC of the two curves.
    delta : float
        ``lerf - morf``.
    n_examples : int
        Examples that were evaluated.
    excluded : int
        Examples left out of `loo_r` because the correlation was
        undefined.

    """

    __slots__ = ("method", "loo_r", "lerf", "morf", "delta", "n_examples", "excluded")

    def __init__(
        self: "MetricsRow",
        method: str,
        loo_r: Optional[float],
        lerf: float,
        morf: float,
        n_examples: int = 0,
        excluded: int = 0,
    ) -> None:
        self.method = method
        self.loo_r = loo_r
        self.lerf = float(lerf)
        self.morf = float(morf)
        self.delta = self.lerf - self.morf
        self.n_examples = int(n_examples)
        self.excluded = int(excluded)

    def as_tuple(self: "MetricsRow") -> Tuple[str, float, float, float, float]:
        """``(method, loo_r, lerf, morf, delta)`` with NaN for an undefined r."""
        r = np.nan if self.loo_r is None else self.loo_r
        return (self.method, r, self.lerf, self.morf, self.delta)

    def __repr__(self: "MetricsRow") -> str:
        return "MetricsRow(%r, loo_r=%r, lerf=%r, morf=%r)" % (
            self.method,
            self.loo_r,
            self.lerf,
            self.morf,
        )


def method_label(method: Method) -> str:
    """Row label of a method name or ablation plan."""
    if isinstance(method, AblationPlan):
        return method.label
    return _explain.METHOD_LABELS.get(method, method)


def _attribute(
    method: Method,
    model: Model,
    x: Any,
    target: int,
    settings: Dict[str, Any],
    index: int,
    loo_scores: Attribution,
) -> Attribution:
    if method == "loo":
        return loo_scores
    if isinstance(method, AblationPlan):
        return _explain.explain("ablation", model, x, target, {**settings, "plan": method})
    if method == "random":
        seed = int(settings.get("seed", 0)) + index
        return _explain.explain("random", model, x, target, {**settings, "seed": seed})
    return _explain.explain(method, model, x, target, settings)


def evaluate_suite(
    model: Model,
    dataset: Dataset,
    methods: Sequence[Method],
    settings: Optional[Mapping[str, Any]] = None,
    eval_n: Optional[int] = 200,
    removal_unit: str = "feature",
    progress: bool = True,
) -> List[MetricsRow]:
    """Evaluate explainers against LOO and by perturbation.

    Every example is explained for its predicted class. Examples on
    which an explainer fails are logged and skipped for that explainer.

    Parameters
    ----------
    model : ModelGraph or ScalarChain
    dataset : ImageDataset or SequenceDataset
    methods : Sequence of str or AblationPlan
        Explainer names (see :py:func:`lrplab.explain.explain`) or
        ablation plans.
    settings : Mapping, optional
        Passed on to :py:func:`lrplab.explain.explain`.
    eval_n : int or None, optional
        Evaluate the first `eval_n` examples (all if ``None``).
    removal_unit : str, optional
        ``'feature'`` or ``'chunk:N'``.
    progress : bool, optional
        Whether to show a progress bar.

    Returns
    -------
    rows : list of MetricsRow
        One per method, in the order given.

    Raises
    ------
    ValueError
        If `methods` is empty.

    """
    if len(methods) == 0:
        raise ValueError("methods must not be empty.")
    settings = dict(settings or {})
    parse_removal_unit(removal_unit)
    n = len(dataset) if eval_n is None else min(int(eval_n), len(dataset))
    rs: List[List[float]] = [[] for _ in methods]
    lerfs: List[List[float]] = [[] for _ in methods]
    morfs: List[List[float]] = [[] for _ in methods]
    excluded = [0] * len(methods)
    for index in tqdm(range(n), desc="evaluating", disable=not progress):
        x, _ = dataset[index]
        target = _explain.predicted_class(model, x)
        loo_scores = _explain.loo(model, x, target)
        for m, method in enumerate(methods):
            try:
                att = _attribute(method, model, x, target, settings, index, loo_scores)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    r = pearson(att.scores, loo_scores.scores)
                lerf = aopc(perturbation_curve(model, x, att, "lerf", removal_unit, target))
                morf = aopc(perturbation_curve(model, x, att, "morf", removal_unit, target))
            except (LrplabError, ValueError, FloatingPointError) as exc:
                logger.warning(
                    "Skipping example %d for %s: %s",
                    index,
                    method_label(method),
                    exc,
                )
                continue
            if r is None:
                excluded[m] += 1
            else:
                rs[m].append(r)
            lerfs[m].append(lerf)
            morfs[m].append(morf)
    rows = []
    for m, method in enumerate(methods):
        if excluded[m]:
            logger.info(
                "%s: %d examples with undefined correlation excluded",
                method_label(method),
                excluded[m],
            )
        rows.append(
            MetricsRow(
                method_label(method),
                float(np.mean(rs[m])) if rs[m] else None,
                float(np.mean(lerfs[m])) if lerfs[m] else np.nan,
                float(np.mean(morfs[m])) if morfs[m] else np.nan,
                len(lerfs[m]),
                excluded[m],
            ),
        )
    return rows


def metrics_table(rows: Sequence[MetricsRow], label: str = "Method") -> pd.DataFrame:
    """Lay rows out with columns ``(label, LOO r, LeRF, MoRF, Δ)``."""
    return pd.DataFrame(
        [row.as_tuple() for row in rows],
        columns=[label, *TABLE_COLUMNS],
    )


def write_table(
    frame: pd.DataFrame,
    path: str,
    digest: Optional[str] = None,
    seed: Optional[int] = None,
) -> None:
    """Write a table as CSV preceded by ``#`` comment lines.

    The comment lines carry the configuration digest and seed. Read the
    file back with ``pandas.read_csv(path, comment='#')``.

    """
    with open(path, "w", encoding="utf-8", newline="") as f:
        if digest is not None:
            f.write(f"# digest={digest}\n")
        if seed is not None:
            f.write(f"# seed={seed}\n")
        frame.to_csv(f, index=False, float_format="%.10g", lineterminator="\n")
