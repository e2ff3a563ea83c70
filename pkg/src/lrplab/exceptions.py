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

"""Module of Exceptions."""


class LrplabError(Exception):
    """Base class of lrplab package exceptions."""


class ShapeError(LrplabError, ValueError):
    """Exception for operands whose shapes do not conform."""


class IdxFormatError(LrplabError, ValueError):
    """Exception for a malformed IDX byte stream.

    Parameters
    ----------
    message : str
        Description of the problem.
    offset : int
        Byte offset into the stream at which the problem was found.

    Attributes
    ----------
    offset : int
        Byte offset into the stream at which the problem was found.

    """

    def __init__(self: "IdxFormatError", message: str, offset: int) -> None:
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class CheckpointError(LrplabError, OSError):
    """Exception for a failure to read or write a checkpoint or cache."""


class DivergenceError(LrplabError, ArithmeticError):
    """Exception for training that produced a non-finite loss or parameter.

    See Also
    --------
    lrplab.train.train

    """


class ConfigError(LrplabError, ValueError):
    """Exception for an invalid experiment configuration."""


class PropagationError(LrplabError, ValueError):
    """Exception for a trace that relevance propagation cannot handle.

    Raised when a layer kind has no propagation rule or when the rule
    configuration does not cover every attention layer.

    """
