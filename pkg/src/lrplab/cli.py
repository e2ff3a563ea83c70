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

"""Module for the ``lrplab`` command line program.

Subcommands:

``prepare-data``
    Cache the downsampled MNIST splits (if the IDX files are present)
    and the keyword task.
``train``
    Train the configured model and overwrite its checkpoint.
``counterexample``
    Relevance of ``x1 * x2 * x3`` in both groupings against LOO.
``rq1``
    Attribution agreement between the two groupings of the linear
    attention network.
``rq2``
    Faithfulness of every explainer on the encoder.
``rq3``
    Faithfulness when the softmax is bypassed in subsets of layers.
``explain``
    Explain one test example with one method.
``eval``
    Faithfulness of chosen explainers on the configured model.

Every command but ``counterexample`` writes a run directory under the
output directory, named after the command and the configuration digest,
holding ``config.json``, ``metadata.json``, CSV tables and
``summary.txt``.

Exit codes are 0 on success, 1 if the counterexample check fails, 2 for
usage and configuration errors, 3 for data and checkpoint I/O errors, 4
if training diverged and 5 for other errors.

"""

import argparse
import hashlib
import importlib
import json
import logging
import math
import os
import sys
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from . import __version__, dataio, metrics, relprop, storage, train
from . import model as _model
from .config import ExperimentConfig, plan_to_json, rules_to_json
from .exceptions import (
    CheckpointError,
    ConfigError,
    DivergenceError,
    IdxFormatError,
    LrplabError,
)
from .model import ModelGraph

# The package re-exports the function ``explain``, which shadows the submodule.
explain = importlib.import_module(".explain", __package__)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DIVERGED = 4
EXIT_OTHER = 5

_TRAIN_OPTIONS = {
    "qkv": ("seed", "lr", "beta1", "beta2", "adam_eps", "epochs", "batch_size", "train_limit", "d_model"),
    "encoder": (
        "seed",
        "lr",
        "beta1",
        "beta2",
        "adam_eps",
        "encoder_epochs",
        "batch_size",
        "train_limit",
        "vocab_size",
        "seq_len",
        "num_classes",
        "n_synthetic",
        "n_layers",
        "d_model",
        "d_hidden",
    ),
}

_RQ1_COLUMNS = ["Method", "L vs R", "L vs LOO", "R vs LOO"]


def _key(cfg: ExperimentConfig, names: Sequence[str]) -> str:
    d = {name: getattr(cfg, name) for name in names}
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode("utf-8")).hexdigest()[:12]


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


class RunDirectory:
    """Where one command writes its outputs.

    Parameters
    ----------
    cfg : ExperimentConfig
    command : str

    """

    def __init__(self: "RunDirectory", cfg: ExperimentConfig, command: str) -> None:
        self.cfg = cfg
        self.command = command
        self.path = os.path.join(cfg.output_dir, f"{command}-{cfg.digest[:12]}")
        os.makedirs(self.path, exist_ok=True)
        cfg.to_json(os.path.join(self.path, "config.json"))

    def file(self: "RunDirectory", name: str) -> str:
        """Path of a file in the run directory."""
        return os.path.join(self.path, name)

    def table(self: "RunDirectory", name: str, frame: pd.DataFrame) -> str:
        """Write a CSV table carrying the digest and seed."""
        path = self.file(name)
        metrics.write_table(frame, path, self.cfg.digest, self.cfg.seed)
        return path

    def finish(self: "RunDirectory", metadata: Dict[str, Any], summary: str) -> None:
        """Write ``metadata.json`` and ``summary.txt`` and print the summary."""
        meta = {
            "command": self.command,
            "digest": self.cfg.digest,
            "seed": self.cfg.seed,
            "version": __version__,
            "relevance_seed": "raw target logit",
            **metadata,
        }
        with open(self.file("metadata.json"), "w", encoding="utf-8") as f:
            json.dump(_jsonable(meta), f, indent=2, sort_keys=True)
            f.write("\n")
        with open(self.file("summary.txt"), "w", encoding="utf-8") as f:
            f.write(summary.rstrip("\n") + "\n")
        print(summary)
        print(f"Results written to {self.path}")


def _checkpoint_path(cfg: ExperimentConfig, name: str) -> str:
    os.makedirs(cfg.checkpoint_dir, exist_ok=True)
    return os.path.join(cfg.checkpoint_dir, name)


def mnist(cfg: ExperimentConfig, split: str) -> dataio.ImageDataset:
    """A downsampled MNIST split, from the cache if there is one."""
    cache = _checkpoint_path(cfg, f"mnist-{split}.h5")
    if os.path.isfile(cache):
        dataset = storage.load_dataset(cache)
        if isinstance(dataset, dataio.ImageDataset):
            return dataset
    dataset = dataio.load_mnist(cfg.data_dir, split)
    storage.save_dataset(cache, dataset)
    return dataset


def synthetic(cfg: ExperimentConfig) -> Tuple[dataio.SequenceDataset, dataio.SequenceDataset]:
    """The keyword task split 80/20, from the cache if there is one."""
    key = _key(cfg, ("seed", "n_synthetic", "vocab_size", "seq_len", "num_classes"))
    cache = _checkpoint_path(cfg, f"synthetic-{key}.h5")
    if os.path.isfile(cache):
        dataset = storage.load_dataset(cache)
    else:
        dataset = dataio.gen_synthetic(
            cfg.seed,
            cfg.n_synthetic,
            cfg.vocab_size,
            cfg.seq_len,
            cfg.num_classes,
        )
        storage.save_dataset(cache, dataset)
    first, second = dataio.split(dataset, 0.8)
    return first, second  # type: ignore[return-value]


def _metadata_for(
    cfg: ExperimentConfig,
    names: Sequence[str],
    accuracy: float,
    history: List[Dict[str, Any]],
) -> Dict[str, Any]:
    options = {name: getattr(cfg, name) for name in names}
    return _jsonable(
        {"config": options, "test_accuracy": accuracy, "seed": cfg.seed, "history": history},
    )


def qkv_pair(cfg: ExperimentConfig, retrain: bool = False) -> Tuple[ModelGraph, ModelGraph, Dict[str, Any]]:
    """The trained linear attention pair, training it if needed."""
    key = _key(cfg, _TRAIN_OPTIONS["qkv"])
    paths = (
        _checkpoint_path(cfg, f"qkv-av-{key}.h5"),
        _checkpoint_path(cfg, f"qkv-kv-{key}.h5"),
    )
    if not retrain and all(os.path.isfile(p) for p in paths):
        av_first, meta = storage.load_checkpoint(paths[0])
        kv_first, _ = storage.load_checkpoint(paths[1])
        return av_first, kv_first, meta
    train_set = dataio.subset(mnist(cfg, "train"), cfg.train_limit)
    test_set = mnist(cfg, "test")
    av_first, kv_first, history = train.train_shared_pair(
        cfg.train_config(),
        train_set,
        None,
        cfg.d_model,
    )
    accuracy = train.evaluate_accuracy(kv_first, test_set, cfg.progress)
    logger.info("linear attention pair: test accuracy %.4f", accuracy)
    meta = _metadata_for(cfg, _TRAIN_OPTIONS["qkv"], accuracy, history)
    storage.save_checkpoint(paths[0], av_first, meta)
    storage.save_checkpoint(paths[1], kv_first, meta)
    return av_first, kv_first, meta


def encoder(cfg: ExperimentConfig, retrain: bool = False) -> Tuple[ModelGraph, Dict[str, Any]]:
    """The trained keyword task encoder, training it if needed."""
    key = _key(cfg, _TRAIN_OPTIONS["encoder"])
    path = _checkpoint_path(cfg, f"encoder-{key}.h5")
    if not retrain and os.path.isfile(path):
        return storage.load_checkpoint(path)
    train_set, test_set = synthetic(cfg)
    trained, history = train.train_encoder(
        cfg.train_config(cfg.encoder_epochs),
        dataio.subset(train_set, cfg.train_limit),
        None,
        cfg.n_layers,
        cfg.d_model,
        cfg.d_hidden,
    )
    accuracy = train.evaluate_accuracy(trained, test_set, cfg.progress)
    logger.info("encoder: test accuracy %.4f", accuracy)
    meta = _metadata_for(cfg, _TRAIN_OPTIONS["encoder"], accuracy, history)
    storage.save_checkpoint(path, trained, meta)
    return trained, meta


def _test_set(cfg: ExperimentConfig) -> dataio.Dataset:
    if cfg.model == "qkv":
        return mnist(cfg, "test")
    return synthetic(cfg)[1]


def _configured_model(cfg: ExperimentConfig) -> ModelGraph:
    if cfg.model == "qkv":
        return qkv_pair(cfg)[0]
    return encoder(cfg)[0]


def cmd_prepare_data(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    """Cache the datasets."""
    train_set, test_set = synthetic(cfg)
    print(f"keyword task: {len(train_set)} training and {len(test_set)} test sequences")
    try:
        for split in ("train", "test"):
            print(f"MNIST {split}: {len(mnist(cfg, split))} images")
    except FileNotFoundError as exc:
        logger.warning("%s", exc)
        print("MNIST not prepared; the linear attention experiments need it.")
    return EXIT_OK


def cmd_train(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    """Train the configured model, overwriting its checkpoint."""
    run = RunDirectory(cfg, f"train-{cfg.model}")
    if cfg.model == "qkv":
        _, _, meta = qkv_pair(cfg, retrain=True)
    else:
        _, meta = encoder(cfg, retrain=True)
    frame = train.history_frame(meta["history"])
    run.table("history.csv", frame)
    summary = frame.to_string(index=False) + f"\n\ntest accuracy: {meta['test_accuracy']:.4f}"
    run.finish({"test_accuracy": meta["test_accuracy"]}, summary)
    return EXIT_OK


def counterexample_report(
    x: Sequence[float] = (2.0, 3.0, 4.0),
    epsilon: float = 1e-12,
    tol: float = 1e-9,
) -> Tuple[pd.DataFrame, bool]:
    """Relevance of a three factor product in both groupings.

    Returns
    -------
    frame : pandas.DataFrame
        Rows ``(x1*x2)*x3``, ``x1*(x2*x3)`` and ``LOO``, columns ``x1``,
        ``x2`` and ``x3``.
    passed : bool
        Whether all three rows match ``(y/4, y/4, y/2)``,
        ``(y/2, y/4, y/4)`` and ``(y, y, y)`` within `tol`.

    """
    cfg = relprop.RuleConfig(epsilon=epsilon)
    rows = []
    for order in ("left", "right"):
        chain = _model.ScalarChain(order)
        rows.append(relprop.propagate(chain.forward(x), 0, cfg).input_relevance)
    rows.append(explain.loo(_model.ScalarChain("left"), x, 0).scores)
    y = float(np.prod(x))
    expected = [
        [y / 4, y / 4, y / 2],
        [y / 2, y / 4, y / 4],
        [y, y, y],
    ]
    passed = all(
        np.allclose(r, e, rtol=0.0, atol=tol * max(1.0, abs(y))) for r, e in zip(rows, expected)
    )
    frame = pd.DataFrame(
        np.array(rows),
        columns=["x1", "x2", "x3"],
        index=["(x1*x2)*x3", "x1*(x2*x3)", "LOO"],
    )
    return frame, passed


def cmd_counterexample(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    """Print the counterexample and check it."""
    x = tuple(args.inputs) if args.inputs else (2.0, 3.0, 4.0)
    frame, passed = counterexample_report(x)
    print(f"inputs: x1={x[0]:g}, x2={x[1]:g}, x3={x[2]:g}, y={float(np.prod(x)):g}")
    print(frame.to_string(float_format=lambda v: f"{v:.12g}"))
    print("PASS" if passed else "FAIL")
    return EXIT_OK if passed else EXIT_CHECK_FAILED


def _mean_r(values: List[Optional[float]]) -> Tuple[Optional[float], int]:
    defined = [v for v in values if v is not None]
    return (float(np.mean(defined)) if defined else None), len(values) - len(defined)


def rq1_table(
    av_first: ModelGraph,
    kv_first: ModelGraph,
    dataset: dataio.Dataset,
    cfg: ExperimentConfig,
) -> Tuple[pd.DataFrame, Dict[str, Any]]:
    """Agreement of each explainer across the two groupings and with LOO."""
    settings = cfg.explain_settings()
    methods = ["loo", "ig", "attnlrp", "cplrp"]
    r: Dict[str, Dict[str, List[Optional[float]]]] = {
        m: {c: [] for c in _RQ1_COLUMNS[1:]} for m in methods
    }
    n = min(cfg.eval_n, len(dataset))
    max_logit_diff = 0.0
    for index in tqdm(range(n), desc="rq1", disable=not cfg.progress):
        x, _ = dataset[index]
        target = explain.predicted_class(av_first, x)
        diff = np.abs(_model.logits(av_first, x) - _model.logits(kv_first, x)).max()
        max_logit_diff = max(max_logit_diff, float(diff))
        reference = explain.loo(av_first, x, target).scores
        for m in methods:
            left = explain.explain(m, av_first, x, target, settings).scores
            right = explain.explain(m, kv_first, x, target, settings).scores
            r[m]["L vs R"].append(metrics.pearson(left, right))
            r[m]["L vs LOO"].append(metrics.pearson(left, reference))
            r[m]["R vs LOO"].append(metrics.pearson(right, reference))
    rows = []
    excluded: Dict[str, Dict[str, int]] = {}
    for m in methods:
        row: List[Any] = [explain.METHOD_LABELS[m]]
        excluded[m] = {}
        for column in _RQ1_COLUMNS[1:]:
            mean, n_excluded = _mean_r(r[m][column])
            row.append(np.nan if mean is None else mean)
            excluded[m][column] = n_excluded
        rows.append(row)
    frame = pd.DataFrame(rows, columns=_RQ1_COLUMNS)
    return frame, {"n_examples": n, "max_logit_difference": max_logit_diff, "excluded": excluded}


def cmd_rq1(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    """Agreement between the two groupings of the linear attention network."""
    run = RunDirectory(cfg, "rq1")
    av_first, kv_first, meta = qkv_pair(cfg)
    frame, extra = rq1_table(av_first, kv_first, mnist(cfg, "test"), cfg)
    run.table("rq1.csv", frame)
    summary = (
        frame.to_string(index=False, float_format=lambda v: f"{v:.4f}")
        + f"\n\ntest accuracy: {meta['test_accuracy']:.4f}"
    )
    run.finish({"test_accuracy": meta["test_accuracy"], **extra}, summary)
    return EXIT_OK


def keyword_top1(model: ModelGraph, dataset: dataio.SequenceDataset, n: int) -> Optional[float]:
    """Share of correctly classified examples whose top LOO token is the keyword."""
    positions = dataset.keyword_positions
    if positions is None:
        return None
    hits = 0
    correct = 0
    for index in range(min(n, len(dataset))):
        x, label = dataset[index]
        if explain.predicted_class(model, x) != label:
            continue
        correct += 1
        hits += int(np.argmax(explain.loo(model, x, label).scores) == positions[index])
    return hits / correct if correct else None


def cmd_rq2(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    """Faithfulness of every explainer on the encoder."""
    run = RunDirectory(cfg, "rq2")
    model, meta = encoder(cfg)
    test_set = synthetic(cfg)[1]
    methods = ["loo", "ig", "rollout", "attnlrp", "cplrp"]
    rows = metrics.evaluate_suite(
        model,
        test_set,
        methods,
        cfg.explain_settings(),
        cfg.eval_n,
        cfg.removal_unit,
        cfg.progress,
    )
    frame = metrics.metrics_table(rows)
    run.table("rq2.csv", frame)
    by_name = {row.method: row for row in rows}
    cp, full = by_name["CP-LRP"], by_name["AttnLRP"]
    difference = None
    if cp.loo_r is not None and full.loo_r is not None:
        difference = cp.loo_r - full.loo_r
    extra = {
        "test_accuracy": meta["test_accuracy"],
        "cplrp_minus_attnlrp_loo_r": difference,
        "excluded": {row.method: row.excluded for row in rows},
        "keyword_top1": keyword_top1(model, test_set, cfg.eval_n),
        "removal_unit": cfg.removal_unit,
        "epsilon": cfg.epsilon,
        "ig_steps": cfg.ig_steps,
    }
    summary = frame.to_string(index=False, float_format=lambda v: f"{v:.4f}")
    run.finish(extra, summary)
    return EXIT_OK


def rq3_table(model: ModelGraph, dataset: dataio.Dataset, cfg: ExperimentConfig) -> Tuple[pd.DataFrame, List[metrics.MetricsRow]]:
    """All three ablation families over ``k = 1..L``."""
    plans = explain.all_plans(len(model.attention_layers()))
    rows = metrics.evaluate_suite(
        model,
        dataset,
        plans,
        cfg.explain_settings(),
        cfg.eval_n,
        cfg.removal_unit,
        cfg.progress,
    )
    frame = metrics.metrics_table(rows, label="Removed layers")
    frame.insert(0, "Family", [plan.family for plan in plans])
    return frame, rows


def cmd_rq3(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    """Faithfulness with the softmax bypassed in subsets of layers."""
    run = RunDirectory(cfg, "rq3")
    model, meta = encoder(cfg)
    frame, rows = rq3_table(model, synthetic(cfg)[1], cfg)
    run.table("rq3.csv", frame)
    summary = frame.to_string(index=False, float_format=lambda v: f"{v:.4f}")
    run.finish(
        {
            "test_accuracy": meta["test_accuracy"],
            "excluded": [row.excluded for row in rows],
            "removal_unit": cfg.removal_unit,
        },
        summary,
    )
    return EXIT_OK


def cmd_explain(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    """Explain one test example."""
    run = RunDirectory(cfg, f"explain-{cfg.model}")
    model = _configured_model(cfg)
    dataset = _test_set(cfg)
    if not 0 <= args.index < len(dataset):
        raise ConfigError(f"--index must be in 0..{len(dataset) - 1}.")
    x, label = dataset[args.index]
    target = explain.predicted_class(model, x) if args.target is None else args.target
    settings = cfg.explain_settings(len(model.attention_layers()))
    if args.method in ("attnlrp", "cplrp", "ablation"):
        n_layers = len(model.attention_layers())
        with open(run.file("rules.json"), "w", encoding="utf-8") as f:
            f.write(rules_to_json(cfg.rule_config(args.method, n_layers)) + "\n")
        if args.method == "ablation":
            with open(run.file("plan.json"), "w", encoding="utf-8") as f:
                f.write(plan_to_json(settings["plan"]) + "\n")
    att = explain.explain(args.method, model, x, target, settings)
    name = f"{args.method}-{args.index}.csv"
    att.to_csv(run.file(name))
    top = np.argsort(-att.scores, kind="stable")[:5]
    summary = "\n".join(
        [f"example {args.index}: label {label}, explained class {target}, method {att.method}"]
        + [f"  feature {int(i)}: {att.scores[i]:.6g}" for i in top],
    )
    run.finish({"index": args.index, "target": target, "label": label, "method": att.method}, summary)
    return EXIT_OK


def cmd_eval(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    """Faithfulness of chosen explainers on the configured model."""
    run = RunDirectory(cfg, f"eval-{cfg.model}")
    model = _configured_model(cfg)
    methods: List[Any] = [m.strip() for m in args.methods.split(",") if m.strip()]
    if cfg.model == "qkv" and "rollout" in methods:
        logger.warning("The linear attention network has no softmax; skipping rollout.")
        methods.remove("rollout")
    if "ablation" in methods:
        plan = cfg.ablation_plan(len(model.attention_layers()))
        if plan is None:
            raise ConfigError("method 'ablation' needs ablation_family and ablation_k.")
        methods[methods.index("ablation")] = plan
    rows = metrics.evaluate_suite(
        model,
        _test_set(cfg),
        methods,
        cfg.explain_settings(),
        cfg.eval_n,
        cfg.removal_unit,
        cfg.progress,
    )
    frame = metrics.metrics_table(rows)
    run.table("eval.csv", frame)
    summary = frame.to_string(index=False, float_format=lambda v: f"{v:.4f}")
    run.finish({"excluded": {row.method: row.excluded for row in rows}}, summary)
    return EXIT_OK


_COMMANDS = {
    "prepare-data": cmd_prepare_data,
    "train": cmd_train,
    "counterexample": cmd_counterexample,
    "rq1": cmd_rq1,
    "rq2": cmd_rq2,
    "rq3": cmd_rq3,
    "explain": cmd_explain,
    "eval": cmd_eval,
}


def build_parser() -> argparse.ArgumentParser:
    """The argument parser of the program."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of options")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", dest="output_dir", help="output directory")
    common.add_argument("--eval-n", dest="eval_n", type=int)
    common.add_argument("--epsilon", type=float)
    common.add_argument("--ig-steps", dest="ig_steps", type=int)
    common.add_argument("--data-dir", dest="data_dir")
    common.add_argument("--checkpoint-dir", dest="checkpoint_dir")
    common.add_argument("--removal-unit", dest="removal_unit")
    common.add_argument("-v", "--verbose", action="store_true")
    common.add_argument("--no-progress", action="store_true")

    parser = argparse.ArgumentParser(
        prog="lrplab",
        description="Relevance propagation and other attributions in attention networks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in _COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=(func.__doc__ or "").strip())
        if name in ("train", "explain", "eval"):
            p.add_argument("--model", choices=("qkv", "encoder"))
        if name == "counterexample":
            p.add_argument("--inputs", type=float, nargs=3, metavar=("X1", "X2", "X3"))
        if name == "explain":
            p.add_argument(
                "--method",
                default="attnlrp",
                choices=("loo", "ig", "rollout", "attnlrp", "cplrp", "random", "ablation"),
            )
            p.add_argument("--index", type=int, default=0)
            p.add_argument("--target", type=int)
        if name == "eval":
            p.add_argument("--methods", default="loo,ig,rollout,attnlrp,cplrp,random")
    return parser


def make_config(args: argparse.Namespace) -> ExperimentConfig:
    """Configuration from the ``--config`` file overridden by flags."""
    try:
        cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    overrides = {
        name: getattr(args, name, None)
        for name in (
            "seed",
            "output_dir",
            "eval_n",
            "epsilon",
            "ig_steps",
            "data_dir",
            "checkpoint_dir",
            "removal_unit",
            "model",
        )
    }
    if args.no_progress:
        overrides["progress"] = False
    try:
        return cfg.update(overrides)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the program.

    Parameters
    ----------
    argv : Sequence of str, optional
        Arguments. ``sys.argv[1:]`` by default.

    Returns
    -------
    code : int
        The exit code.

    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = make_config(args)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"lrplab: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"lrplab: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (CheckpointError, IdxFormatError, OSError) as exc:
        print(f"lrplab: data error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (LrplabError, ValueError) as exc:
        print(f"lrplab: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
