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

import numpy as np

from lrplab import dataio
from lrplab import model as lm

# Fixed seeds, so that every numeric threshold in the tests is checked
# against the same draws on every run.
default_seed = 20240531

# Shapes of the small models the tests run on.
qkv_seq_len = 16
qkv_d_model = 4
qkv_num_classes = 3

encoder_vocab_size = 8
encoder_seq_len = 6
encoder_num_classes = 3
encoder_n_layers = 2
encoder_d_model = 8
encoder_d_hidden = 8


def make_rng(seed=default_seed):
    return np.random.default_rng(seed)


def random_matrix(rng, rows, cols, low=-1.0, high=1.0):
    return rng.uniform(low, high, size=(rows, cols))


def random_image(rng, n_pixels=qkv_seq_len):
    side = int(np.sqrt(n_pixels))
    return rng.random((side, side))


def random_tokens(rng, vocab_size=encoder_vocab_size, seq_len=encoder_seq_len):
    return rng.integers(0, vocab_size, size=seq_len)


def small_qkv_pair(seed=default_seed):
    # Both groupings of one linear attention network.
    layers = lm.qkv_layers("av_first", qkv_seq_len, qkv_d_model, qkv_num_classes)
    params = lm.init_params(layers, seed)
    return lm.build_qkv_pair(params, qkv_seq_len, qkv_d_model, qkv_num_classes)


def small_encoder(seed=default_seed, n_layers=encoder_n_layers):
    return lm.build_encoder(
        encoder_vocab_size,
        encoder_seq_len,
        encoder_num_classes,
        seed,
        n_layers,
        encoder_d_model,
        encoder_d_hidden,
    )


def random_linear(rng, widths=(5, 4, 3), bias=False):
    weights = [random_matrix(rng, a, b) for a, b in zip(widths[:-1], widths[1:])]
    biases = None
    if bias:
        biases = [rng.uniform(-0.5, 0.5, size=b) for b in widths[1:]]
    return lm.build_linear(weights, biases)


def random_images(rng, n, n_pixels=qkv_seq_len, num_classes=qkv_num_classes):
    side = int(np.sqrt(n_pixels))
    return dataio.ImageDataset(
        rng.random((n, side, side)),
        rng.integers(0, num_classes, size=n),
    )


def keyword_task(seed=default_seed, n=400):
    return dataio.gen_synthetic(
        seed,
        n,
        encoder_vocab_size,
        encoder_seq_len,
        encoder_num_classes,
    )
