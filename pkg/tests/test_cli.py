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

import json

import pandas as pd
import pytest
from make_randoms import keyword_task, make_rng, small_encoder

from lrplab import cli, dataio, metrics
from lrplab import config as lc

# A configuration small enough to train and evaluate in seconds.
tiny_options = {
    "n_synthetic": 60,
    "vocab_size": 8,
    "seq_len": 6,
    "num_classes": 3,
    "n_layers": 1,
    "d_model": 4,
    "d_hidden": 4,
    "encoder_epochs": 1,
    "epochs": 1,
    "batch_size": 16,
    "train_limit": 20,
    "eval_n": 3,
    "ig_steps": 8,
    "progress": False,
}


@pytest.fixture()
def workspace(tmp_path):
    (tmp_path / "config.json").write_text(json.dumps(tiny_options), encoding="utf-8")
    return tmp_path


def write_mnist(directory, n_train=20, n_test=4):
    rng = make_rng()
    directory.mkdir()
    for stem, n in (("train", n_train), ("t10k", n_test)):
        images = rng.integers(0, 256, size=(n, 28, 28))
        labels = rng.integers(0, 10, size=n)
        (directory / f"{stem}-images-idx3-ubyte").write_bytes(dataio.serialize_idx(images))
        (directory / f"{stem}-labels-idx1-ubyte").write_bytes(dataio.serialize_idx(labels))


def run(workspace, command, *args, checkpoints="checkpoints", out="runs"):
    return cli.main(
        [
            command,
            "--config",
            str(workspace / "config.json"),
            "--data-dir",
            str(workspace / "mnist"),
            "--checkpoint-dir",
            str(workspace / checkpoints),
            "--out",
            str(workspace / out),
            *args,
        ],
    )


def run_dir(workspace, prefix, out="runs"):
    found = sorted((workspace / out).glob(prefix + "-*"))
    assert len(found) == 1
    return found[0]


def read_table(path):
    return pd.read_csv(path, comment="#")


def test_counterexample(capsys):
    assert cli.main(["counterexample"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "PASS" in out
    assert "(x1*x2)*x3" in out
    assert cli.main(["counterexample", "--inputs", "1", "1", "1"]) == cli.EXIT_OK
    assert "PASS" in capsys.readouterr().out


def test_counterexample_report():
    frame, passed = cli.counterexample_report((2.0, 3.0, 4.0))
    assert passed
    assert list(frame.columns) == ["x1", "x2", "x3"]
    assert frame.loc["(x1*x2)*x3"].tolist() == pytest.approx([6.0, 6.0, 12.0], abs=1e-9)
    assert frame.loc["x1*(x2*x3)"].tolist() == pytest.approx([12.0, 6.0, 6.0], abs=1e-9)
    assert frame.loc["LOO"].tolist() == pytest.approx([24.0, 24.0, 24.0])
    # A stabilizer this large breaks the half split.
    _, passed = cli.counterexample_report((2.0, 3.0, 4.0), epsilon=1.0)
    assert not passed


def test_usage_errors(workspace, capsys):
    assert cli.main([]) == cli.EXIT_USAGE
    assert cli.main(["frobnicate"]) == cli.EXIT_USAGE
    assert cli.main(["rq2", "--seed", "many"]) == cli.EXIT_USAGE
    assert run(workspace, "rq2", "--eval-n", "0") == cli.EXIT_USAGE
    assert run(workspace, "rq2", "--removal-unit", "chunk:0") == cli.EXIT_USAGE
    assert cli.main(["--version"]) == cli.EXIT_OK
    assert cli.__version__ in capsys.readouterr().out


def test_config_file_errors(workspace):
    bad = workspace / "bad.json"
    bad.write_text('{"colour": "red"}', encoding="utf-8")
    assert cli.main(["rq2", "--config", str(bad)]) == cli.EXIT_USAGE
    bad.write_text('{"seed": "zero"}', encoding="utf-8")
    assert cli.main(["rq2", "--config", str(bad)]) == cli.EXIT_USAGE
    assert cli.main(["rq2", "--config", str(workspace / "missing.json")]) == cli.EXIT_IO


def test_missing_mnist(workspace):
    assert run(workspace, "prepare-data") == cli.EXIT_OK
    assert list((workspace / "checkpoints").glob("synthetic-*.h5"))
    assert run(workspace, "rq1") == cli.EXIT_IO


def test_rq2(workspace):
    assert run(workspace, "rq2") == cli.EXIT_OK
    path = run_dir(workspace, "rq2")
    frame = read_table(path / "rq2.csv")
    assert list(frame.columns) == ["Method", "LOO r", "LeRF", "MoRF", "Δ"]
    assert frame["Method"].tolist() == ["LOO", "IG", "Rollout", "AttnLRP", "CP-LRP"]
    assert frame["LOO r"][0] == pytest.approx(1.0)
    assert (frame["Δ"] - (frame["LeRF"] - frame["MoRF"])).abs().max() < 1e-8
    with open(path / "metadata.json", encoding="utf-8") as f:
        meta = json.load(f)
    assert meta["command"] == "rq2"
    assert path.name == f"rq2-{meta['digest'][:12]}"
    assert "cplrp_minus_attnlrp_loo_r" in meta
    assert (path / "config.json").is_file()
    assert "Method" in (path / "summary.txt").read_text(encoding="utf-8").splitlines()[0]
    lines = (path / "rq2.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == f"# digest={meta['digest']}"
    assert lines[1] == "# seed=0"


def test_rq3(workspace):
    assert run(workspace, "rq3") == cli.EXIT_OK
    frame = read_table(run_dir(workspace, "rq3") / "rq3.csv")
    assert list(frame.columns) == ["Family", "Removed layers", "LOO r", "LeRF", "MoRF", "Δ"]
    assert frame["Family"].tolist() == ["front_to_back", "back_to_front", "single"]
    # With one layer every family bypasses the same softmax.
    assert frame["LeRF"].nunique() == 1


def test_rq3_identities_with_two_layers():
    model = small_encoder(n_layers=2)
    dataset = keyword_task(n=40)
    cfg = lc.ExperimentConfig(n_layers=2, eval_n=20, progress=False)
    frame, rows = cli.rq3_table(model, dataset, cfg)
    assert len(frame) == 6
    by_plan = dict(zip(zip(frame["Family"], frame["Removed layers"]), rows))
    cp = metrics.evaluate_suite(
        model,
        dataset,
        ["cplrp"],
        cfg.explain_settings(),
        cfg.eval_n,
        progress=False,
    )[0]

    def same(a, b):
        assert a.lerf == pytest.approx(b.lerf, rel=0.0, abs=1e-9)
        assert a.morf == pytest.approx(b.morf, rel=0.0, abs=1e-9)
        assert a.delta == pytest.approx(b.delta, rel=0.0, abs=1e-9)
        assert (a.loo_r is None) == (b.loo_r is None)
        if a.loo_r is not None:
            assert a.loo_r == pytest.approx(b.loo_r, rel=0.0, abs=1e-9)

    same(by_plan[("single", "1")], by_plan[("front_to_back", "1")])
    same(by_plan[("front_to_back", "1-2")], cp)
    same(by_plan[("back_to_front", "1-2")], cp)


def test_train_then_explain(workspace):
    assert run(workspace, "train") == cli.EXIT_OK
    history = read_table(run_dir(workspace, "train-encoder") / "history.csv")
    assert history["epoch"].tolist() == [1]
    assert run(workspace, "explain", "--method", "cplrp", "--index", "1") == cli.EXIT_OK
    path = run_dir(workspace, "explain-encoder")
    scores = pd.read_csv(path / "cplrp-1.csv")
    assert list(scores.columns) == ["index", "raw", "normalized"]
    assert len(scores) == tiny_options["seq_len"]
    rules = lc.rules_from_json((path / "rules.json").read_text(encoding="utf-8"))
    assert rules.attn_rules == {1: "cplrp"}
    assert run(workspace, "explain", "--index", "1000") == cli.EXIT_USAGE
    assert run(workspace, "explain", "--method", "ablation") == cli.EXIT_USAGE


def test_eval(workspace):
    assert run(workspace, "eval", "--methods", "loo,random") == cli.EXIT_OK
    frame = read_table(run_dir(workspace, "eval-encoder") / "eval.csv")
    assert frame["Method"].tolist() == ["LOO", "Random"]
    assert run(workspace, "eval", "--methods", "ablation") == cli.EXIT_USAGE


def test_runs_are_reproducible(workspace):
    for name in ("a", "b"):
        assert run(workspace, "rq2", checkpoints=f"ckpt-{name}", out=f"out-{name}") == cli.EXIT_OK
    (a,) = (workspace / "ckpt-a").glob("encoder-*.h5")
    b = workspace / "ckpt-b" / a.name
    assert a.read_bytes() == b.read_bytes()
    table_a = run_dir(workspace, "rq2", out="out-a") / "rq2.csv"
    table_b = run_dir(workspace, "rq2", out="out-b") / "rq2.csv"
    assert table_a.read_bytes() == table_b.read_bytes()


def test_linear_attention_commands(workspace):
    write_mnist(workspace / "mnist")
    assert run(workspace, "rq1") == cli.EXIT_OK
    path = run_dir(workspace, "rq1")
    frame = read_table(path / "rq1.csv")
    assert list(frame.columns) == ["Method", "L vs R", "L vs LOO", "R vs LOO"]
    assert frame["Method"].tolist() == ["LOO", "IG", "AttnLRP", "CP-LRP"]
    by_method = frame.set_index("Method")
    for method in ("LOO", "IG", "CP-LRP"):
        assert by_method.loc[method, "L vs R"] == pytest.approx(1.0)
    with open(path / "metadata.json", encoding="utf-8") as f:
        meta = json.load(f)
    assert meta["max_logit_difference"] < 1e-9
    assert len(list((workspace / "checkpoints").glob("qkv-*.h5"))) == 2
    assert run(workspace, "eval", "--model", "qkv", "--methods", "loo,rollout,cplrp") == cli.EXIT_OK
    frame = read_table(run_dir(workspace, "eval-qkv") / "eval.csv")
    assert frame["Method"].tolist() == ["LOO", "CP-LRP"]
