# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

"""Binary checkpoints of module state.

Layout, all little-endian:

    magic       8 bytes  b"VXHCKPT\\0"
    version     uint32
    count       uint32
    count x entry:
        name_len  uint16, name  utf-8
        ndim      uint8,  dims  ndim x uint32
        values    prod(dims) x float32

A JSON manifest with the run configuration sits next to the file as
`<path>.json`.
"""

import json
import os
import struct
from collections import OrderedDict
from typing import Any, Dict, Optional, Tuple

import numpy as np

from voxhand.errors import MalformedHeader, TruncatedFile
from voxhand.nn.layers import Module

MAGIC = b"VXHCKPT\0"
VERSION = 1


def manifest_path(path: str) -> str:
    return path + ".json"


def save_state(path: str, state: Dict[str, np.ndarray]) -> None:
    """Writes named arrays as float32.

    Args:
        path (str): Destination file.
        state (Dict[str, np.ndarray]): Arrays by name; order is preserved.
    """
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(state)))
        for name, value in state.items():
            encoded = name.encode("utf-8")
            value = np.asarray(value)
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack(f"<B{value.ndim}I", value.ndim, *value.shape))
            f.write(value.astype("<f4").tobytes())


def load_state(path: str) -> Dict[str, np.ndarray]:
    """Reads arrays written by `save_state`.

    Args:
        path (str): Checkpoint file.

    Returns:
        Dict[str, np.ndarray]: float32 arrays by name, in file order.

    Raises:
        MalformedHeader: On a wrong magic or unsupported version.
        TruncatedFile: If the file ends inside an entry or has trailing bytes.
    """
    with open(path, "rb") as f:
        buffer = f.read()

    def take(offset: int, size: int) -> bytes:
        if offset + size > len(buffer):
            raise TruncatedFile(
                f"Checkpoint {path} ends at byte {len(buffer)}, expected at least "
                f"{offset + size}."
            )
        return buffer[offset : offset + size]

    if take(0, len(MAGIC)) != MAGIC:
        raise MalformedHeader(f"{path} is not a voxhand checkpoint.")
    offset = len(MAGIC)
    version, count = struct.unpack("<II", take(offset, 8))
    offset += 8
    if version != VERSION:
        raise MalformedHeader(f"Checkpoint version {version} is not supported.")

    state: Dict[str, np.ndarray] = OrderedDict()
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(offset, 2))
        name = take(offset + 2, name_len).decode("utf-8")
        offset += 2 + name_len
        (ndim,) = struct.unpack("<B", take(offset, 1))
        shape = struct.unpack(f"<{ndim}I", take(offset + 1, 4 * ndim))
        offset += 1 + 4 * ndim
        size = 4 * int(np.prod(shape, dtype=np.int64))
        values = np.frombuffer(take(offset, size), dtype="<f4")
        state[name] = values.reshape(shape).copy()
        offset += size
    if offset != len(buffer):
        raise TruncatedFile(
            f"Checkpoint {path} has {len(buffer) - offset} trailing bytes."
        )
    return state


def save_checkpoint(
    path: str, model: Module, manifest: Optional[Dict[str, Any]] = None
) -> None:
    """Saves a model's parameters and buffers, plus an optional manifest.

    Args:
        path (str): Destination file.
        model (Module): Model to save.
        manifest (Optional[Dict[str, Any]]): JSON-serializable metadata.
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    save_state(path, model.state_dict())
    if manifest is not None:
        with open(manifest_path(path), "w") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)


def load_manifest(path: str) -> Optional[Dict[str, Any]]:
    """
    Args:
        path (str): Checkpoint file.

    Returns:
        Optional[Dict[str, Any]]: The sidecar manifest, if present.
    """
    if not os.path.isfile(manifest_path(path)):
        return None
    with open(manifest_path(path)) as f:
        return json.load(f)


def load_checkpoint(
    path: str, model: Module
) -> Tuple[Module, Optional[Dict[str, Any]]]:
    """Loads a checkpoint into `model` in place.

    Args:
        path (str): Checkpoint file.
        model (Module): Model with the checkpoint's architecture.

    Returns:
        Tuple[Module, Optional[Dict[str, Any]]]: The model and its manifest.
    """
    model.load_state_dict(load_state(path))
    return model, load_manifest(path)
