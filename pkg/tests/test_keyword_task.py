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

import pytest

from lrplab import cli, dataio
from lrplab import train as tr
from lrplab.config import ExperimentConfig

# Trains the full size encoder, which takes minutes.
pytestmark = pytest.mark.slow


def test_trained_encoder_finds_the_keyword():
    cfg = ExperimentConfig(seed=0, progress=False)
    dataset = dataio.gen_synthetic(
        cfg.seed,
        cfg.n_synthetic,
        cfg.vocab_size,
        cfg.seq_len,
        cfg.num_classes,
    )
    train_set, test_set = dataio.split(dataset, 0.8)
    model, _ = tr.train_encoder(
        cfg.train_config(cfg.encoder_epochs),
        train_set,
        None,
        cfg.n_layers,
        cfg.d_model,
        cfg.d_hidden,
    )
    assert tr.evaluate_accuracy(model, test_set) >= 0.95
    assert cli.keyword_top1(model, test_set, cfg.eval_n) >= 0.9
