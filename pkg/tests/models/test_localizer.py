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
from voxhand.models.localizer import (
    LocalizationNet,
    LocalizerConfig,
    build_localizer,
    forward_localizer,
)
from voxhand.nn.functional import mse_joint_loss
from voxhand.nn.layers import Linear
from voxhand.nn.optim import Adam
from voxhand.nn.tensor import Tensor
from voxhand.training.trainer import train_step


@pytest.fixture
def config() -> LocalizerConfig:
    """A small localizer on 32 x 32 patches.

    Returns:
        LocalizerConfig: Configuration.
    """
    return LocalizerConfig(input_size=32, filters=(2, 2, 2), fc_units=8)


def test_zero_weights_predict_zero_offset(config: LocalizerConfig) -> None:
    """Tests that an untrained zero network does not move the reference.

    Args:
        config (LocalizerConfig): Small architecture.
    """
    patches = np.random.default_rng(0).uniform(-1, 1, size=(3, 1, 32, 32))
    offsets = LocalizationNet(config).predict_offsets(patches)
    assert offsets.shape == (3, 3)
    np.testing.assert_array_equal(offsets, 0.0)


def test_offsets_are_clamped(config: LocalizerConfig) -> None:
    """Tests the optional clamp of the predicted offset norm.

    Args:
        config (LocalizerConfig): Small architecture.
    """
    model = LocalizationNet(config)
    last = [m for m in model.modules() if isinstance(m, Linear)][-1]
    last.bias.data[...] = [3.0, 4.0, 0.0]
    patches = np.zeros((1, 1, 32, 32), dtype=np.float32)

    np.testing.assert_allclose(forward_localizer(model, patches), [[450.0, 600.0, 0.0]])
    with pytest.warns(UserWarning):
        clamped = forward_localizer(model, patches, clamp_mm=150.0)
    np.testing.assert_allclose(clamped, [[90.0, 120.0, 0.0]], rtol=1e-6)


def test_build_localizer_is_seeded(config: LocalizerConfig) -> None:
    """Tests that equal seeds give equal predictions.

    Args:
        config (LocalizerConfig): Small architecture.
    """
    patches = np.random.default_rng(1).uniform(-1, 1, size=(2, 1, 32, 32))
    a = build_localizer(config, seed=3, sigma=0.1).predict_offsets(patches)
    b = build_localizer(config, seed=3, sigma=0.1).predict_offsets(patches)
    np.testing.assert_array_equal(a, b)


def test_wrong_patch_size(config: LocalizerConfig) -> None:
    """Tests that patches of another size are rejected.

    Args:
        config (LocalizerConfig): Small architecture.
    """
    with pytest.raises(ShapeMismatch):
        LocalizationNet(config).predict_offsets(np.zeros((1, 1, 16, 16)))


@pytest.mark.parametrize(
    "kwargs", [{"input_size": 30}, {"filters": (8, 0, 32)}, {"fc_units": 0}]
)
def test_config_validation(kwargs: dict) -> None:
    """Tests rejected configurations.

    Args:
        kwargs (dict): Offending field.
    """
    with pytest.raises(ValueError):
        LocalizerConfig(**kwargs)


def test_gradient_reaches_every_parameter(config: LocalizerConfig) -> None:
    """Tests that one backward pass leaves a nonzero gradient on every weight.

    Args:
        config (LocalizerConfig): Small architecture.
    """
    model = build_localizer(config, seed=0, sigma=0.1)
    patches = np.random.default_rng(2).uniform(-1, 1, size=(2, 1, 32, 32))
    loss = mse_joint_loss(model(Tensor(patches)), np.full((2, 3), 20.0))
    loss.backward()
    for name, parameter in model.named_parameters():
        assert np.any(parameter.grad), name


def test_fits_fixed_offsets(config: LocalizerConfig) -> None:
    """Tests that Adam fits the offsets of two fixed patches.

    Args:
        config (LocalizerConfig): Small architecture.
    """
    model = build_localizer(config, seed=0, sigma=0.1)
    optimizer = Adam(model.parameters(), lr=1e-3)
    patches = np.random.default_rng(3).uniform(-1, 1, size=(2, 1, 32, 32))
    offsets = np.array([[10.0, -20.0, 5.0], [-15.0, 0.0, 30.0]])
    losses = [
        train_step(model, optimizer, patches, offsets, step) for step in range(500)
    ]
    assert all(np.isfinite(losses))
    assert min(losses[-10:]) < 0.05 * losses[0]
