# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

import numpy as np
import pytest

from voxhand.errors import ShapeMismatch
from voxhand.models.handnet import (
    HandNet,
    HandNetConfig,
    build_handnet,
    forward_handnet,
)
from voxhand.nn.functional import mse_joint_loss
from voxhand.nn.layers import Linear, Mode
from voxhand.nn.tensor import Tensor


@pytest.fixture
def small_config() -> HandNetConfig:
    """A narrow network on 32^3 grids.

    Returns:
        HandNetConfig: Configuration.
    """
    return HandNetConfig(input_size=32, channels=(4, 4, 8, 8, 4), adaptive_pool_size=2)


@pytest.fixture
def grids() -> np.ndarray:
    """Two sparse random occupancy grids of 32^3.

    Returns:
        np.ndarray: float32 array of shape (2, 1, 32, 32, 32).
    """
    rng = np.random.default_rng(0)
    return (rng.random((2, 1, 32, 32, 32)) < 0.05).astype(np.float32)


def test_default_architecture() -> None:
    """Tests the layer plan of the default network."""
    model = HandNet(HandNetConfig())
    assert model.conv3d_count() == 11
    assert model.fc_widths() == [924, 231, 63]
    assert model.spatial_trace() == [88, 44, 22, 11, 22]
    assert model.model_size_bytes() < 42 * 1024 * 1024
    assert model.model_size_bytes() >= 4 * model.parameter_count()


def test_fc_widths_follow_joint_count() -> None:
    """Tests that the FC head scales with the number of joints."""
    model = HandNet(HandNetConfig(num_joints=14))
    assert model.fc_widths() == [14 * 44, 14 * 11, 14 * 3]


def test_forward_shape(small_config: HandNetConfig, grids: np.ndarray) -> None:
    """Tests the output shape in both modes.

    Args:
        small_config (HandNetConfig): Small architecture.
        grids (np.ndarray): Input batch.
    """
    model = build_handnet(small_config, seed=0)
    assert model(Tensor(grids)).shape == (2, 63)
    joints = forward_handnet(model, grids, Mode.Eval)
    assert len(joints) == 2 and joints[0].joints.shape == (21, 3)
    assert not model.training


def test_zero_head_predicts_reference(
    small_config: HandNetConfig, grids: np.ndarray
) -> None:
    """Tests that a zeroed last FC layer puts every joint on the reference.

    Args:
        small_config (HandNetConfig): Small architecture.
        grids (np.ndarray): Input batch.
    """
    model = build_handnet(small_config, seed=0)
    last = [m for m in model.modules() if isinstance(m, Linear)][-1]
    last.weight.data[...] = 0.0
    last.bias.data[...] = 0.0
    references = np.array([[10.0, -20.0, 500.0], [0.0, 5.0, 650.0]])
    joints = forward_handnet(model, grids, Mode.Eval, references=references)
    for joint_set, reference in zip(joints, references):
        np.testing.assert_allclose(joint_set.joints, np.tile(reference, (21, 1)))


def test_eval_is_deterministic(small_config: HandNetConfig, grids: np.ndarray) -> None:
    """Tests that identical grids give identical predictions.

    Args:
        small_config (HandNetConfig): Small architecture.
        grids (np.ndarray): Input batch.
    """
    model = build_handnet(small_config, seed=1, sigma=0.1)
    twin = np.concatenate([grids[:1], grids[:1]])
    first, second = forward_handnet(model, twin, Mode.Eval)
    np.testing.assert_allclose(first.joints, second.joints, rtol=1e-6, atol=1e-6)
    again = forward_handnet(model, grids, Mode.Eval)[0]
    np.testing.assert_allclose(again.joints, first.joints, rtol=1e-6, atol=1e-6)


def test_equal_seeds_equal_models(small_config: HandNetConfig) -> None:
    """Tests that the seed fixes every weight.

    Args:
        small_config (HandNetConfig): Small architecture.
    """
    a = build_handnet(small_config, seed=4)
    b = build_handnet(small_config, seed=4)
    for (name, pa), (_, pb) in zip(a.named_parameters(), b.named_parameters()):
        np.testing.assert_array_equal(pa.data, pb.data, err_msg=name)


def test_wrong_input_size(small_config: HandNetConfig) -> None:
    """Tests that grids of another size are rejected.

    Args:
        small_config (HandNetConfig): Small architecture.
    """
    model = build_handnet(small_config)
    with pytest.raises(ShapeMismatch):
        forward_handnet(model, np.zeros((1, 1, 24, 24, 24), dtype=np.float32))


def test_config_validation() -> None:
    """Tests rejected and warned-about configurations."""
    with pytest.raises(ValueError):
        HandNetConfig(input_size=8)
    with pytest.raises(ValueError):
        HandNetConfig(dropout=1.0)
    with pytest.raises(ValueError):
        HandNetConfig(channels=(16, 0, 64, 64, 32))
    with pytest.warns(UserWarning, match="not divisible by 8"):
        HandNetConfig(input_size=44)


@pytest.mark.slow
def test_default_network_forward() -> None:
    """Tests one eval forward pass of the full-size network."""
    model = build_handnet(HandNetConfig(), seed=0)
    grid = np.zeros((1, 1, 88, 88, 88), dtype=np.float32)
    grid[0, 0, 40:48, 40:48, 40:48] = 1.0
    joints = forward_handnet(model, grid, Mode.Eval)
    assert joints[0].joints.shape == (21, 3)
    assert np.all(np.isfinite(joints[0].joints))


@pytest.mark.parametrize("size", [32, 40, 48])
def test_gradient_reaches_every_parameter(size: int) -> None:
    """Tests the shape contract and a nonzero gradient on every parameter.

    Args:
        size (int): Input grid edge.
    """
    config = HandNetConfig(
        input_size=size, channels=(4, 4, 8, 8, 4), adaptive_pool_size=2
    )
    model = build_handnet(config, seed=0, sigma=0.05)
    rng = np.random.default_rng(size)
    grids = (rng.random((2, 1, size, size, size)) < 0.1).astype(np.float32)
    targets = rng.normal(0.0, 30.0, size=(2, 63))

    model.train()
    out = model(Tensor(grids))
    assert out.shape == (2, 63)
    assert model.spatial_trace() == [size, size // 2, size // 4, size // 8, size // 4]
    mse_joint_loss(out, targets).backward()
    for name, parameter in model.named_parameters():
        assert np.any(parameter.grad), name
