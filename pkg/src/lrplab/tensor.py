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

"""Dense matrix kernel.

Every activation, weight and relevance in the package is carried as a
*matrix*: a C-contiguous, two dimensional ``numpy.ndarray`` of
``float64``. The functions here validate shapes and implement the few
operations that the relevance rules need beyond plain numpy, most
importantly the stabilized division ``a / (b + eps * sign(b))`` with the
convention ``sign(0) = +1`` so that no denominator is ever zero.

"""

import sys
from typing import Any, Optional

import numpy as np

from .exceptions import ShapeError

if sys.version_info >= (3, 8):
    from typing import Literal

    ElementwiseOp = Literal["add", "sub", "mul", "div"]
else:
    ElementwiseOp = str

#: Type alias used in annotations throughout the package.
Matrix = np.ndarray


def as_matrix(x: Any, name: str = "matrix") -> Matrix:
    """Convert to a validated float64 matrix.

    Scalars become ``1 x 1`` matrices and vectors become row
    vectors. Nothing with more than two dimensions is accepted.

    Parameters
    ----------
    x : array_like
        The data to convert.
    name : str, optional
        Name used in error messages.

    Returns
    -------
    m : numpy.ndarray
        C-contiguous ``float64`` array with ``ndim == 2``. A copy is made
        only when needed.

    Raises
    ------
    ShapeError
        If `x` has more than two dimensions or a zero length axis.
    ValueError
        If `x` contains NaN or Inf.

    """
    m = np.ascontiguousarray(x, dtype=np.float64)
    if m.ndim < 2:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {m.shape}.")
    if 0 in m.shape:
        raise ShapeError(f"{name} must have positive dimensions, got {m.shape}.")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite values.")
    return m


def sign(x: np.ndarray) -> np.ndarray:
    """Sign with ``sign(0) = +1``.

    Parameters
    ----------
    x : numpy.ndarray

    Returns
    -------
    s : numpy.ndarray
        ``-1.0`` where `x` is negative and ``+1.0`` everywhere else.

    """
    return np.where(x < 0.0, -1.0, 1.0)


def stabilize(z: np.ndarray, eps: float) -> np.ndarray:
    """Stabilized denominator ``z + eps * sign(z)``.

    Parameters
    ----------
    z : numpy.ndarray
        Denominator values.
    eps : float
        Non-negative stabilizer.

    Returns
    -------
    d : numpy.ndarray
        Same shape as `z`. Never zero when ``eps > 0``.

    """
    return z + eps * sign(z)


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Matrix product with dimension checking.

    Parameters
    ----------
    a : numpy.ndarray
        ``n x k`` matrix.
    b : numpy.ndarray
        ``k x m`` matrix.

    Returns
    -------
    c : numpy.ndarray
        ``n x m`` product.

    Raises
    ------
    ShapeError
        If the inner dimensions differ.

    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"Cannot multiply {a.shape[0]}x{a.shape[1]} by "
            f"{b.shape[0]}x{b.shape[1]}: inner dimensions {a.shape[1]} "
            f"and {b.shape[0]} differ.",
        )
    return np.ascontiguousarray(a @ b)


def softmax_rows(z: Matrix, keep: Optional[np.ndarray] = None) -> Matrix:
    """Row-wise softmax with max subtraction.

    Parameters
    ----------
    z : numpy.ndarray
        Logits.
    keep : numpy.ndarray of bool or None, optional
        Columns to attend to. Columns that are not kept get zero weight
        and the remaining ones are renormalized. A row with no kept
        column is all zero. ``None`` (default) keeps every column.

    Returns
    -------
    a : numpy.ndarray
        Same shape as `z`, nonnegative, each row summing to one (or
        zero if nothing is kept).

    Raises
    ------
    ShapeError
        If `keep` does not have one entry per column.

    """
    z = as_matrix(z, "z")
    if keep is None:
        shifted = z - z.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)
    keep = np.asarray(keep, dtype=bool).reshape(-1)
    if keep.shape[0] != z.shape[1]:
        raise ShapeError(
            f"keep has {keep.shape[0]} entries but z has {z.shape[1]} columns.",
        )
    out = np.zeros_like(z)
    if not keep.any():
        return out
    zk = z[:, keep]
    e = np.exp(zk - zk.max(axis=1, keepdims=True))
    out[:, keep] = e / e.sum(axis=1, keepdims=True)
    return out


def elementwise(
    a: Matrix,
    b: Matrix,
    op: ElementwiseOp,
    eps: float = 1e-6,
) -> Matrix:
    """Entry-wise binary operation on equal shape matrices.

    Parameters
    ----------
    a, b : numpy.ndarray
        Operands of identical shape.
    op : {'add', 'sub', 'mul', 'div'}
        The operation. ``'div'`` is the stabilized division
        ``a / (b + eps * sign(b))``.
    eps : float, optional
        Stabilizer for ``'div'``. Ignored otherwise.

    Returns
    -------
    c : numpy.ndarray

    Raises
    ------
    ShapeError
        If the shapes differ.
    ValueError
        If `op` is unknown or `eps` is not positive for ``'div'``.

    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape != b.shape:
        raise ShapeError(f"Shapes {a.shape} and {b.shape} differ.")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        if not eps > 0.0:
            raise ValueError("eps must be positive.")
        return a / stabilize(b, eps)
    raise ValueError(f"Unknown elementwise operation {op!r}.")
