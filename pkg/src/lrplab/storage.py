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

"""Module for reading and writing checkpoints and dataset caches.

Both are HDF5 files. The root Group carries a ``format`` and a
``version`` Attribute that are checked on reading. Checkpoints also
carry the model's ``architecture`` and free form ``metadata`` as JSON
strings, and hold one little-endian ``float64`` Dataset per parameter,
named after the parameter. Datasets are written without creation
timestamps, so that saving the same content twice gives identical
files.

"""

import contextlib
import json
import os.path
import threading
import types
from typing import Any, Dict, List, Mapping, Optional, Tuple, Type

import h5py
import numpy as np

from .dataio import Dataset, ImageDataset, SequenceDataset
from .exceptions import CheckpointError
from .model import ModelGraph

CHECKPOINT_FORMAT = "lrplab-checkpoint"
DATASET_FORMAT = "lrplab-dataset"
FORMAT_VERSION = 1


def convert_attribute_to_string(value: Any) -> Optional[str]:
    """Convert an Attribute value to a string.

    Parameters
    ----------
    value :
        The Attribute value.

    Returns
    -------
    s : str or None
        The ``str`` value of the Attribute if the conversion is possible,
        or ``None`` if not.

    """
    if value is None or isinstance(value, str):
        return value
    if isinstance(value, (bytes, np.bytes_)):
        return value.decode()
    if isinstance(value, np.str_):
        return str(value)
    return None


def set_attributes_all(
    target: h5py.HLObject,
    attributes: Mapping[str, Tuple[str, Any]],
) -> None:
    """Set Attributes in bulk, discarding all others.

    Parameters
    ----------
    target : h5py.File or h5py.Group or h5py.Dataset
        Where to set them.
    attributes : Mapping
        Names to ``(kind, value)`` pairs. Kind ``'string'`` stores the
        value as fixed length bytes and ``'value'`` stores it as is.

    """
    attrs = target.attrs
    for k in set(attrs.keys()) - set(attributes):
        del attrs[k]
    for k, (kind, value) in sorted(attributes.items()):
        attrs.create(k, np.bytes_(value.encode("utf-8")) if kind == "string" else value)


class File:
    """Wrapper around an HDF5 file holding arrays and Attributes.

    Supports the ``with`` statement and closes the file on exit.

    Note
    ----
    This class is threadsafe to the ``threading`` module, but not the
    ``multiprocessing`` module.

    Parameters
    ----------
    filename : str
        Path of the file.
    writable : bool, optional
        Whether writing is allowed. A writable file is created (or
        truncated) when opened. The default is ``False`` (readonly).
    file_format : str, optional
        The expected ``format`` Attribute. A writable file gets it, a
        readonly file is checked against it.

    Raises
    ------
    TypeError
        If an argument has an invalid type.
    CheckpointError
        If the file cannot be opened or has the wrong format or version.

    """

    def __init__(
        self: "File",
        filename: str,
        writable: bool = False,
        file_format: str = CHECKPOINT_FORMAT,
    ) -> None:
        self._file: Optional[h5py.File] = None
        self._lock: threading.Lock = threading.Lock()
        if not isinstance(filename, str):
            raise TypeError("filename must be str.")
        if not isinstance(writable, bool):
            raise TypeError("writable must be bool.")
        self._writable = writable
        self._format = file_format
        if writable:
            # No timestamps on the root group either, so that equal
            # contents give equal bytes.
            fcpl = h5py.h5p.create(h5py.h5p.FILE_CREATE)
            fcpl.set_obj_track_times(False)
            try:
                fid = h5py.h5f.create(os.fsencode(filename), h5py.h5f.ACC_TRUNC, fcpl=fcpl)
                self._file = h5py.File(fid)
            except OSError as exc:
                raise CheckpointError(f"Cannot create {filename!r}: {exc}") from exc
            set_attributes_all(
                self._file,
                {"format": ("string", file_format), "version": ("value", np.int64(FORMAT_VERSION))},
            )
            return
        if not os.path.isfile(filename):
            raise CheckpointError(f"No such file: {filename!r}.")
        try:
            self._file = h5py.File(filename, mode="r")
        except OSError as exc:
            raise CheckpointError(f"{filename!r} is not a readable HDF5 file: {exc}") from exc
        found = convert_attribute_to_string(self._file.attrs.get("format"))
        if found != file_format:
            self.close()
            raise CheckpointError(
                f"{filename!r} has format {found!r}, expected {file_format!r}.",
            )
        version = int(self._file.attrs.get("version", -1))
        if version != FORMAT_VERSION:
            self.close()
            raise CheckpointError(
                f"{filename!r} has unsupported version {version}.",
            )

    def __enter__(self: "File") -> "File":
        """Open the HDF5 file."""
        return self

    def __exit__(
        self: "File",
        tp: Optional[Type[BaseException]],
        value: Optional[BaseException],
        traceback: Optional[types.TracebackType],
    ) -> None:
        """Close the HDF5 file."""
        self.close()

    def __del__(self: "File") -> None:
        """Delete this wrapper around the HDF5 file."""
        with contextlib.suppress(Exception):
            self.close()

    @property
    def closed(self: "File") -> bool:
        """bool: Whether the file is closed or not."""
        return self._file is None

    def close(self: "File") -> None:
        """Closes the file."""
        with self._lock:
            if self._file is not None:
                self._file.close()
                self._file = None

    def _handle(self: "File") -> h5py.File:
        if self._file is None:
            raise CheckpointError("File is closed.")
        return self._file

    def write_array(self: "File", name: str, array: np.ndarray, dtype: str = "<f8") -> None:
        """Write an array to a Dataset at the root.

        Raises
        ------
        CheckpointError
            If the file is closed or readonly.

        """
        with self._lock:
            f = self._handle()
            if not self._writable:
                raise CheckpointError("File is readonly.")
            f.create_dataset(
                name,
                data=np.ascontiguousarray(array, dtype=np.dtype(dtype)),
                track_times=False,
            )

    def read_array(self: "File", name: str) -> np.ndarray:
        """Read a Dataset at the root.

        Raises
        ------
        CheckpointError
            If the file is closed or there is no such Dataset.

        """
        with self._lock:
            f = self._handle()
            if name not in f:
                raise CheckpointError(f"Missing Dataset {name!r}.")
            return np.array(f[name][()])

    def names(self: "File") -> List[str]:
        """Names of the Datasets at the root, sorted."""
        with self._lock:
            return sorted(self._handle().keys())

    def set_json(self: "File", name: str, value: Any) -> None:
        """Store a JSON-ready value as a string Attribute of the root."""
        with self._lock:
            f = self._handle()
            attrs = {k: ("value", v) for k, v in f.attrs.items()}
            attrs[name] = ("string", json.dumps(value, sort_keys=True))
            set_attributes_all(f, attrs)

    def get_json(self: "File", name: str) -> Any:
        """Read a string Attribute of the root as JSON.

        Raises
        ------
        CheckpointError
            If it is missing or not valid JSON.

        """
        with self._lock:
            s = convert_attribute_to_string(self._handle().attrs.get(name))
        if s is None:
            raise CheckpointError(f"Missing Attribute {name!r}.")
        try:
            return json.loads(s)
        except ValueError as exc:
            raise CheckpointError(f"Attribute {name!r} is not valid JSON.") from exc

    def set_value(self: "File", name: str, value: Any) -> None:
        """Store a numeric Attribute of the root."""
        with self._lock:
            f = self._handle()
            attrs = {k: ("value", v) for k, v in f.attrs.items()}
            attrs[name] = ("value", value)
            set_attributes_all(f, attrs)

    def get_value(self: "File", name: str) -> Any:
        """Read a numeric Attribute of the root."""
        with self._lock:
            attrs = self._handle().attrs
            if name not in attrs:
                raise CheckpointError(f"Missing Attribute {name!r}.")
            return attrs[name]


def save_checkpoint(
    path: str,
    model: ModelGraph,
    metadata: Optional[Mapping[str, Any]] = None,
) -> None:
    """Save a model and its metadata.

    Parameters
    ----------
    path : str
        File to write (overwritten if it exists).
    model : ModelGraph
    metadata : Mapping, optional
        JSON-ready metadata (configuration, accuracy, seed, ...).

    Raises
    ------
    CheckpointError
        If the file cannot be written.

    """
    with File(path, writable=True, file_format=CHECKPOINT_FORMAT) as f:
        f.set_json("architecture", model.architecture())
        f.set_json("metadata", dict(metadata or {}))
        for name, value in sorted(model.params.items()):
            f.write_array(name, value)


def load_checkpoint(path: str) -> Tuple[ModelGraph, Dict[str, Any]]:
    """Load a model saved by :py:func:`save_checkpoint`.

    Returns
    -------
    model : ModelGraph
    metadata : dict

    Raises
    ------
    CheckpointError
        If the file is missing, has the wrong format or version, or lacks
        a parameter.

    """
    with File(path, file_format=CHECKPOINT_FORMAT) as f:
        architecture = f.get_json("architecture")
        metadata = f.get_json("metadata")
        params = {name: f.read_array(name) for name in f.names()}
    try:
        model = ModelGraph.from_architecture(architecture, params)
    except KeyError as exc:
        raise CheckpointError(f"{path!r} lacks parameter {exc.args[0]!r}.") from exc
    except (ValueError, TypeError) as exc:
        raise CheckpointError(f"{path!r} holds an invalid model: {exc}") from exc
    return model, metadata


def save_dataset(path: str, dataset: Dataset) -> None:
    """Cache a dataset.

    Raises
    ------
    TypeError
        If `dataset` is of an unknown type.
    CheckpointError
        If the file cannot be written.

    """
    if not isinstance(dataset, (ImageDataset, SequenceDataset)):
        raise TypeError("dataset must be an ImageDataset or SequenceDataset.")
    with File(path, writable=True, file_format=DATASET_FORMAT) as f:
        f.write_array("labels", dataset.labels, "<i8")
        if isinstance(dataset, ImageDataset):
            f.set_json("kind", "image")
            f.write_array("images", dataset.images)
            return
        f.set_json("kind", "sequence")
        f.set_value("vocab_size", np.int64(dataset.vocab_size))
        f.set_value("seq_len", np.int64(dataset.seq_len))
        f.set_value("num_classes", np.int64(dataset.num_classes))
        f.write_array("sequences", dataset.sequences, "<i8")
        if dataset.keyword_positions is not None:
            f.write_array("keyword_positions", dataset.keyword_positions, "<i8")


def load_dataset(path: str) -> Dataset:
    """Load a dataset cached by :py:func:`save_dataset`.

    Raises
    ------
    CheckpointError
        If the file is missing or malformed.

    """
    with File(path, file_format=DATASET_FORMAT) as f:
        kind = f.get_json("kind")
        labels = f.read_array("labels")
        try:
            if kind == "image":
                return ImageDataset(f.read_array("images"), labels)
            if kind == "sequence":
                positions = None
                if "keyword_positions" in f.names():
                    positions = f.read_array("keyword_positions")
                return SequenceDataset(
                    f.read_array("sequences"),
                    labels,
                    int(f.get_value("vocab_size")),
                    int(f.get_value("num_classes")),
                    positions,
                )
        except ValueError as exc:
            raise CheckpointError(f"{path!r} holds an invalid dataset: {exc}") from exc
    raise CheckpointError(f"{path!r} holds an unknown dataset kind {kind!r}.")
