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

"""Module to explain attention networks by relevance propagation.

This is the lrplab package, a small laboratory for comparing relevance
propagation, leave-one-out, integrated gradients and attention rollout
on attention networks built from numpy arrays, and for measuring how
faithful each attribution is.

Version 0.1

"""

__version__ = "0.1"

from .exceptions import (
    CheckpointError,
    ConfigError,
    DivergenceError,
    IdxFormatError,
    LrplabError,
    PropagationError,
    ShapeError,
)
from .model import ForwardTrace, LayerSpec, ModelGraph, ScalarChain, forward
from .relprop import RelevanceMap, RuleConfig, propagate
from .explain import AblationPlan, Attribution, explain
from .metrics import MetricsRow, evaluate_suite
from .config import ExperimentConfig
from .storage import load_checkpoint, save_checkpoint

__all__ = [
    "AblationPlan",
    "Attribution",
    "CheckpointError",
    "ConfigError",
    "DivergenceError",
    "ExperimentConfig",
    "ForwardTrace",
    "IdxFormatError",
    "LayerSpec",
    "LrplabError",
    "MetricsRow",
    "ModelGraph",
    "PropagationError",
    "RelevanceMap",
    "RuleConfig",
    "ScalarChain",
    "ShapeError",
    "__version__",
    "evaluate_suite",
    "explain",
    "forward",
    "load_checkpoint",
    "propagate",
    "save_checkpoint",
]
