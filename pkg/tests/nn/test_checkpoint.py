# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

import os
from typing import Any

import numpy as np
import pytest

from voxhand.errors import MalformedHeader, TruncatedFile
from voxhand.nn.checkpoint import (
    load_checkpoint,
    load_manifest,
    load_state,
    save_checkpoint,
    save_state,
)
from voxhand.nn.layers import LayerKind, LayerSpec, Sequential, build_sequential
from voxhand.nn.optim import initialize
from voxhand.nn.tensor import Tensor


def _model() -> Sequential:
    return build_sequential(
        [
            LayerSpec(kind=LayerKind.Conv3D, in_channels=1, filters=2),
            LayerSpec(kind=LayerKind.BatchNorm, filters=2),
            LayerSpec(kind=LayerKind.Flatten),
            LayerSpec(kind=LayerKind.FullyConnected, in_channels=16, filters=3),
        ]
    )


@pytest.fixture
def checkpoint_path(tmp_path: Any) -> str:
    """A trained-looking model saved with a manifest.

    Args:
        tmp_path (Any): pytest temporary directory.

    Returns:
        str: Path of the checkpoint file.
    """
    model = initialize(_model(), sigma=0.3, seed=5)
    model(Tensor(np.random.default_rng(0).random((3, 1, 4, 4, 4))))
    path = os.path.join(str(tmp_path), "nested", "model.ckpt")
    save_checkpoint(path, model, {"steps": 12, "num_joints": 1})
    return path


def test_checkpoint_round_trip(checkpoint_path: str) -> None:
    """Tests bit-exact parameters and identical outputs after reloading.

    Args:
        checkpoint_path (str): Saved checkpoint.
    """
    original = initialize(_model(), sigma=0.3, seed=5)
    x = Tensor(np.random.default_rng(0).random((3, 1, 4, 4, 4)))
    original(x)
    restored, manifest = load_checkpoint(checkpoint_path, _model())

    assert manifest == {"steps": 12, "num_joints": 1}
    for name, value in original.state_dict().items():
        np.testing.assert_array_equal(restored.state_dict()[name], value, err_msg=name)
    original.eval()
    restored.eval()
    np.testing.assert_array_equal(original(x).data, restored(x).data)


def test_state_keeps_order_and_dtype(tmp_path: Any) -> None:
    """Tests that entries come back in file order as float32.

    Args:
        tmp_path (Any): pytest temporary directory.
    """
    path = os.path.join(str(tmp_path), "state.ckpt")
    state = {"b": np.arange(6.0).reshape(2, 3), "a": np.float32(1.5) * np.ones(())}
    save_state(path, state)
    loaded = load_state(path)
    assert list(loaded) == ["b", "a"]
    assert loaded["b"].dtype == np.float32
    np.testing.assert_array_equal(loaded["b"], state["b"])
    assert loaded["a"].shape == ()


def test_manifest_absent(tmp_path: Any) -> None:
    """Tests that a checkpoint without a sidecar has no manifest.

    Args:
        tmp_path (Any): pytest temporary directory.
    """
    path = os.path.join(str(tmp_path), "bare.ckpt")
    save_checkpoint(path, _model())
    assert load_manifest(path) is None


def test_bad_magic_and_version(checkpoint_path: str) -> None:
    """Tests header validation.

    Args:
        checkpoint_path (str): Saved checkpoint.
    """
    with open(checkpoint_path, "rb") as f:
        raw = bytearray(f.read())

    wrong_magic = bytearray(raw)
    wrong_magic[0:1] = b"X"
    with open(checkpoint_path, "wb") as f:
        f.write(wrong_magic)
    with pytest.raises(MalformedHeader):
        load_state(checkpoint_path)

    wrong_version = bytearray(raw)
    wrong_version[8] = 2
    with open(checkpoint_path, "wb") as f:
        f.write(wrong_version)
    with pytest.raises(MalformedHeader):
        load_state(checkpoint_path)


@pytest.mark.parametrize("cut", [1, 4, 100])
def test_truncated_checkpoint(checkpoint_path: str, cut: int) -> None:
    """Tests that a shortened file is detected.

    Args:
        checkpoint_path (str): Saved checkpoint.
        cut (int): Bytes removed from the end.
    """
    with open(checkpoint_path, "rb") as f:
        raw = f.read()
    with open(checkpoint_path, "wb") as f:
        f.write(raw[:-cut])
    with pytest.raises(TruncatedFile):
        load_state(checkpoint_path)


def test_trailing_bytes(checkpoint_path: str) -> None:
    """Tests that extra bytes after the last entry are rejected.

    Args:
        checkpoint_path (str): Saved checkpoint.
    """
    with open(checkpoint_path, "ab") as f:
        f.write(b"\0\0")
    with pytest.raises(TruncatedFile):
        load_state(checkpoint_path)
