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

"""Module for the datasets.

Provides the two datasets the experiments run on.

* MNIST digits read from the IDX files distributed by its authors and
  reduced to ``14 x 14`` by ``2 x 2`` mean pooling
  (:py:class:`ImageDataset`).
* A synthetic keyword task (:py:class:`SequenceDataset`). Each sequence
  is filler tokens with exactly one keyword token planted at a random
  position, and the label is the class of that keyword. The planted
  position is therefore the single highly relevant token of every
  example.

Pixel values are scaled to ``[0, 1]`` and are not standardized, so that
removing a pixel (setting it to zero) is removal against a zero
baseline.

"""

import gzip
import os.path
import struct
import sys
from typing import Iterator, Optional, Tuple, Union

import numpy as np

from .exceptions import IdxFormatError, ShapeError
from .tensor import Matrix

if sys.version_info >= (3, 8):
    from typing import Literal

    Split = Literal["train", "test"]
else:
    Split = str

# IDX type code for unsigned bytes, the only one MNIST uses.
_IDX_UBYTE = 0x08
_IDX_MAX_ELEMENTS = 2**31

_MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


class ImageDataset:
    """Labelled greyscale images.

    Parameters
    ----------
    images : numpy.ndarray
        ``N x H x W`` array of pixel values in ``[0, 1]``.
    labels : numpy.ndarray
        ``N`` class indices in ``0..9``.

    Raises
    ------
    ShapeError
        If the number of images and labels differ.
    ValueError
        If a pixel is outside of ``[0, 1]`` or a label is outside of
        ``0..9``.

    """

    feature_kind = "pixel"

    def __init__(self: "ImageDataset", images: np.ndarray, labels: np.ndarray) -> None:
        images = np.ascontiguousarray(images, dtype=np.float64)
        labels = np.ascontiguousarray(labels, dtype=np.int64).reshape(-1)
        if images.ndim != 3:
            raise ShapeError(f"images must be N x H x W, got {images.shape}.")
        if images.shape[0] != labels.shape[0]:
            raise ShapeError(
                f"{images.shape[0]} images but {labels.shape[0]} labels.",
            )
        if images.size and (images.min() < 0.0 or images.max() > 1.0):
            raise ValueError("pixel values must be in [0, 1].")
        if labels.size and (labels.min() < 0 or labels.max() > 9):
            raise ValueError("labels must be in 0..9.")
        self._images = images
        self._labels = labels

    @property
    def images(self: "ImageDataset") -> np.ndarray:
        """numpy.ndarray: The ``N x H x W`` images."""
        return self._images

    @property
    def labels(self: "ImageDataset") -> np.ndarray:
        """numpy.ndarray: The class index of each image."""
        return self._labels

    @property
    def num_classes(self: "ImageDataset") -> int:
        """int: Always 10."""
        return 10

    def __len__(self: "ImageDataset") -> int:
        return int(self._labels.shape[0])

    def __getitem__(self: "ImageDataset", index: int) -> Tuple[Matrix, int]:
        return self._images[index], int(self._labels[index])

    def __iter__(self: "ImageDataset") -> Iterator[Tuple[Matrix, int]]:
        for i in range(len(self)):
            yield self[i]

    def take(self: "ImageDataset", indices: np.ndarray) -> "ImageDataset":
        """Make a new dataset out of the examples at `indices`."""
        return ImageDataset(self._images[indices], self._labels[indices])


class SequenceDataset:
    """Labelled fixed length token sequences.

    Parameters
    ----------
    sequences : numpy.ndarray
        ``N x T`` token ids.
    labels : numpy.ndarray
        ``N`` class indices.
    vocab_size : int
        Number of distinct tokens ``V``.
    num_classes : int
        Number of classes ``C``.
    keyword_positions : numpy.ndarray or None, optional
        Position of the planted keyword in each sequence, if known.

    Raises
    ------
    ShapeError
        If the arrays do not conform.
    ValueError
        If a token id is not below `vocab_size` or a label is not below
        `num_classes`.

    """

    feature_kind = "token"

    def __init__(
        self: "SequenceDataset",
        sequences: np.ndarray,
        labels: np.ndarray,
        vocab_size: int,
        num_classes: int,
        keyword_positions: Optional[np.ndarray] = None,
    ) -> None:
        sequences = np.ascontiguousarray(sequences, dtype=np.int64)
        labels = np.ascontiguousarray(labels, dtype=np.int64).reshape(-1)
        if sequences.ndim != 2:
            raise ShapeError(f"sequences must be N x T, got {sequences.shape}.")
        if sequences.shape[0] != labels.shape[0]:
            raise ShapeError(
                f"{sequences.shape[0]} sequences but {labels.shape[0]} labels.",
            )
        if sequences.size and (sequences.min() < 0 or sequences.max() >= vocab_size):
            raise ValueError(f"token ids must be in 0..{vocab_size - 1}.")
        if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
            raise ValueError(f"labels must be in 0..{num_classes - 1}.")
        if keyword_positions is not None:
            keyword_positions = np.ascontiguousarray(
                keyword_positions,
                dtype=np.int64,
            ).reshape(-1)
            if keyword_positions.shape != labels.shape:
                raise ShapeError("keyword_positions must have one entry per label.")
        self._sequences = sequences
        self._labels = labels
        self._vocab_size = int(vocab_size)
        self._num_classes = int(num_classes)
        self._keyword_positions = keyword_positions

    @property
    def sequences(self: "SequenceDataset") -> np.ndarray:
        """numpy.ndarray: The ``N x T`` token ids."""
        return self._sequences

    @property
    def labels(self: "SequenceDataset") -> np.ndarray:
        """numpy.ndarray: The class index of each sequence."""
        return self._labels

    @property
    def vocab_size(self: "SequenceDataset") -> int:
        """int: Number of distinct tokens."""
        return self._vocab_size

    @property
    def seq_len(self: "SequenceDataset") -> int:
        """int: Length of every sequence."""
        return int(self._sequences.shape[1])

    @property
    def num_classes(self: "SequenceDataset") -> int:
        """int: Number of classes."""
        return self._num_classes

    @property
    def keyword_positions(self: "SequenceDataset") -> Optional[np.ndarray]:
        """numpy.ndarray or None: Where each keyword was planted."""
        return self._keyword_positions

    def __len__(self: "SequenceDataset") -> int:
        return int(self._labels.shape[0])

    def __getitem__(self: "SequenceDataset", index: int) -> Tuple[np.ndarray, int]:
        return self._sequences[index], int(self._labels[index])

    def __iter__(self: "SequenceDataset") -> Iterator[Tuple[np.ndarray, int]]:
        for i in range(len(self)):
            yield self[i]

    def take(self: "SequenceDataset", indices: np.ndarray) -> "SequenceDataset":
        """Make a new dataset out of the examples at `indices`."""
        positions = None
        if self._keyword_positions is not None:
            positions = self._keyword_positions[indices]
        return SequenceDataset(
            self._sequences[indices],
            self._labels[indices],
            self._vocab_size,
            self._num_classes,
            positions,
        )


Dataset = Union[ImageDataset, SequenceDataset]


def parse_idx(data: bytes) -> np.ndarray:
    """Decode an IDX byte stream of unsigned bytes.

    The header is two zero bytes, the type code (``0x08`` for unsigned
    bytes), the number of dimensions, and then each dimension as a
    big-endian 32 bit unsigned integer. So the magic number is
    ``0x00000803`` (2051) for a stack of images and ``0x00000801``
    (2049) for a label vector.

    Parameters
    ----------
    data : bytes
        The whole file contents.

    Returns
    -------
    array : numpy.ndarray
        For one dimensional data, ``int64`` labels. Otherwise ``float64``
        values scaled from ``0..255`` to ``[0, 1]`` with the shape given
        by the header.

    Raises
    ------
    IdxFormatError
        If the magic number is wrong, a dimension is zero or too large, or
        the payload length does not match the header.

    See Also
    --------
    serialize_idx

    """
    data = bytes(data)
    if len(data) < 4:
        raise IdxFormatError(
            f"Header needs 4 bytes but the stream has {len(data)}",
            len(data),
        )
    if data[0] != 0 or data[1] != 0:
        raise IdxFormatError(
            f"Bad magic number 0x{data[:4].hex()}: first two bytes must be zero",
            0,
        )
    if data[2] != _IDX_UBYTE:
        raise IdxFormatError(
            f"Unsupported type code 0x{data[2]:02x}, only 0x08 (unsigned byte)",
            2,
        )
    ndim = data[3]
    if not 1 <= ndim <= 3:
        raise IdxFormatError(f"Unsupported number of dimensions {ndim}", 3)
    header_len = 4 + 4 * ndim
    if len(data) < header_len:
        raise IdxFormatError(
            f"Header with {ndim} dimensions needs {header_len} bytes but the "
            f"stream has {len(data)}",
            len(data),
        )
    dims = struct.unpack(f">{ndim}I", data[4:header_len])
    count = 1
    for i, d in enumerate(dims):
        count *= d
        if d == 0 or count > _IDX_MAX_ELEMENTS:
            raise IdxFormatError(
                f"Dimension {i} of size {d} gives an invalid element count",
                4 + 4 * i,
            )
    payload = len(data) - header_len
    if payload != count:
        raise IdxFormatError(
            f"Expected {count} payload bytes for dimensions {dims} but found "
            f"{payload}",
            header_len + min(payload, count),
        )
    values = np.frombuffer(data, dtype=np.uint8, offset=header_len).reshape(dims)
    if ndim == 1:
        return values.astype(np.int64)
    return values.astype(np.float64) / 255.0


def serialize_idx(array: np.ndarray) -> bytes:
    """Encode an array as an IDX byte stream of unsigned bytes.

    Inverse of :py:func:`parse_idx`. Integer arrays are written as is;
    floating point arrays are taken to be in ``[0, 1]`` and rescaled to
    ``0..255`` with rounding.

    Parameters
    ----------
    array : numpy.ndarray
        One to three dimensional data.

    Returns
    -------
    data : bytes

    Raises
    ------
    ShapeError
        If `array` has an unsupported number of dimensions.
    ValueError
        If a value does not fit in an unsigned byte.

    """
    array = np.asarray(array)
    if not 1 <= array.ndim <= 3:
        raise ShapeError(f"IDX supports 1 to 3 dimensions, got {array.ndim}.")
    if np.issubdtype(array.dtype, np.floating):
        array = np.rint(array * 255.0)
    if array.size and (array.min() < 0 or array.max() > 255):
        raise ValueError("values do not fit in an unsigned byte.")
    header = bytes((0, 0, _IDX_UBYTE, array.ndim)) + struct.pack(
        f">{array.ndim}I",
        *array.shape,
    )
    return header + array.astype(np.uint8).tobytes(order="C")


def read_idx(path: str) -> np.ndarray:
    """Read an IDX file, gzip compressed or not.

    Parameters
    ----------
    path : str

    Returns
    -------
    array : numpy.ndarray
        See :py:func:`parse_idx`.

    """
    with open(path, "rb") as f:
        data = f.read()
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    return parse_idx(data)


def downsample_14(img: Matrix) -> Matrix:
    """Reduce a ``28 x 28`` image to ``14 x 14`` by ``2 x 2`` mean pooling.

    Parameters
    ----------
    img : numpy.ndarray
        ``28 x 28`` image.

    Returns
    -------
    small : numpy.ndarray
        ``14 x 14`` image whose pixels are the means of the
        non-overlapping ``2 x 2`` blocks of `img`.

    Raises
    ------
    ShapeError
        If `img` is not ``28 x 28``.

    """
    img = np.asarray(img, dtype=np.float64)
    if img.shape != (28, 28):
        raise ShapeError(f"Expected a 28 x 28 image, got {img.shape}.")
    return np.ascontiguousarray(img.reshape(14, 2, 14, 2).mean(axis=(1, 3)))


def _find_mnist_file(data_dir: str, stem: str) -> str:
    for name in (stem, stem + ".gz", stem.replace("-idx", ".idx"), stem + ".idx"):
        path = os.path.join(data_dir, name)
        if os.path.isfile(path):
            return path
    raise FileNotFoundError(
        f"Could not find the MNIST file {stem}[.gz] in {data_dir!r}. Download "
        "the four IDX files of the MNIST database into that directory.",
    )


def load_mnist(data_dir: str, split: Split = "train") -> ImageDataset:
    """Load an MNIST split and downsample it to ``14 x 14``.

    Parameters
    ----------
    data_dir : str
        Directory holding the standard IDX files (optionally gzipped).
    split : {'train', 'test'}, optional
        The standard 60000 image training split or the 10000 image test
        split.

    Returns
    -------
    dataset : ImageDataset

    Raises
    ------
    FileNotFoundError
        If the files are missing.
    IdxFormatError
        If a file is malformed.
    ShapeError
        If the images are not ``28 x 28`` or the counts differ.

    """
    if split not in _MNIST_FILES:
        raise ValueError("split must be 'train' or 'test'.")
    image_stem, label_stem = _MNIST_FILES[split]
    images = read_idx(_find_mnist_file(data_dir, image_stem))
    labels = read_idx(_find_mnist_file(data_dir, label_stem))
    if images.ndim != 3 or images.shape[1:] != (28, 28):
        raise ShapeError(f"Expected N x 28 x 28 images, got {images.shape}.")
    small = images.reshape(-1, 14, 2, 14, 2).mean(axis=(2, 4))
    return ImageDataset(small, labels)


def gen_synthetic(
    seed: int,
    n: int,
    vocab_size: int,
    seq_len: int,
    num_classes: int,
) -> SequenceDataset:
    """Generate the synthetic keyword classification task.

    Tokens ``0..C-1`` are keywords, one per class, and tokens
    ``C..V-1`` are fillers. Every sequence is uniformly random fillers
    with one keyword written over a uniformly random position. Labels are
    balanced: class ``c`` is used ``n // C`` or ``n // C + 1`` times.

    Parameters
    ----------
    seed : int
        Seed of the random generator. Equal seeds give identical datasets.
    n : int
        Number of sequences.
    vocab_size : int
        ``V``, must be at least ``C + 2``.
    seq_len : int
        ``T``, must be at least 4.
    num_classes : int
        ``C``, must be at least 2.

    Returns
    -------
    dataset : SequenceDataset
        With ``keyword_positions`` set.

    Raises
    ------
    ValueError
        If a parameter is out of bounds.

    """
    if n < 1:
        raise ValueError("n must be positive.")
    if num_classes < 2:
        raise ValueError("num_classes must be at least 2.")
    if vocab_size < num_classes + 2:
        raise ValueError("vocab_size must be at least num_classes + 2.")
    if seq_len < 4:
        raise ValueError("seq_len must be at least 4.")
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n, dtype=np.int64) % num_classes)
    sequences = rng.integers(num_classes, vocab_size, size=(n, seq_len))
    positions = rng.integers(0, seq_len, size=n)
    sequences[np.arange(n), positions] = labels
    return SequenceDataset(sequences, labels, vocab_size, num_classes, positions)


def split(dataset: Dataset, fraction: float = 0.8) -> Tuple[Dataset, Dataset]:
    """Split a dataset into a leading and a trailing part.

    The generator already shuffles, so a contiguous split is a random
    split that stays fixed for a given seed.

    Parameters
    ----------
    dataset : ImageDataset or SequenceDataset
    fraction : float, optional
        Share of examples in the first part.

    Returns
    -------
    first, second : ImageDataset or SequenceDataset

    """
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must be strictly between 0 and 1.")
    cut = int(round(len(dataset) * fraction))
    indices = np.arange(len(dataset))
    return dataset.take(indices[:cut]), dataset.take(indices[cut:])


def subset(dataset: Dataset, n: Optional[int]) -> Dataset:
    """The first `n` examples (all of them if `n` is ``None``)."""
    if n is None or n >= len(dataset):
        return dataset
    return dataset.take(np.arange(n))
