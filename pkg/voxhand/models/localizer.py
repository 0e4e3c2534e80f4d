# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

"""2D network refining the hand's center of mass.

Three conv+pool stages followed by two FC layers map a normalized depth patch
around the center of mass to a 3D offset in mm. The 2D stages run on the 3D
kernels with a unit depth axis: (1, 3, 3) convolutions and (1, 2, 2) pools.
"""

from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic.dataclasses import dataclass

from voxhand.errors import ShapeMismatch
from voxhand.geometry import clamp_offset
from voxhand.nn.layers import LayerKind, LayerSpec, Module, build_sequential
from voxhand.nn.optim import DEFAULT_SIGMA, initialize
from voxhand.nn.tensor import Tensor, no_grad

NUM_STAGES = 3


@dataclass(frozen=True)
class LocalizerConfig:
    """
    Args:
        input_size (int): Edge of the square depth patch. (default: `96`)
        filters (Tuple[int, int, int]): Filters of the three conv stages.
        fc_units (int): Width of the hidden FC layer. (default: `1024`)
        output_scale_mm (float): mm per unit of the last FC output.
        half_extent_mm (float): Half size of the patch window in mm.
    """

    input_size: int = 96
    filters: Tuple[int, int, int] = (8, 16, 32)
    fc_units: int = 1024
    output_scale_mm: float = 150.0
    half_extent_mm: float = 150.0

    def __post_init__(self) -> None:
        if self.input_size < 2**NUM_STAGES or self.input_size % 2**NUM_STAGES:
            raise ValueError(
                f"Localizer input_size must be a positive multiple of 8, "
                f"got {self.input_size}."
            )
        if min(self.filters) < 1 or self.fc_units < 1:
            raise ValueError(
                f"Filters {self.filters} and fc_units {self.fc_units} must be positive."
            )
        if self.output_scale_mm <= 0 or self.half_extent_mm <= 0:
            raise ValueError("output_scale_mm and half_extent_mm must be positive.")

    @property
    def flat_features(self) -> int:
        edge = self.input_size // 2**NUM_STAGES
        return self.filters[-1] * edge * edge


def localizer_layer_specs(cfg: LocalizerConfig) -> List[LayerSpec]:
    specs: List[LayerSpec] = []
    in_channels = 1
    for filters in cfg.filters:
        specs += [
            LayerSpec(
                kind=LayerKind.Conv3D,
                in_channels=in_channels,
                filters=filters,
                kernel=(1, 3, 3),
                padding=(0, 1, 1),
            ),
            LayerSpec(kind=LayerKind.ReLU),
            LayerSpec(kind=LayerKind.MaxPool3D, kernel=(1, 2, 2), stride=(1, 2, 2)),
        ]
        in_channels = filters
    specs += [
        LayerSpec(kind=LayerKind.Flatten),
        LayerSpec(
            kind=LayerKind.FullyConnected,
            in_channels=cfg.flat_features,
            filters=cfg.fc_units,
        ),
        LayerSpec(kind=LayerKind.ReLU),
        LayerSpec(kind=LayerKind.FullyConnected, in_channels=cfg.fc_units, filters=3),
        LayerSpec(kind=LayerKind.Scale, factor=cfg.output_scale_mm),
    ]
    return specs


class LocalizationNet(Module):
    """Predicts the offset from the center of mass to the hand center."""

    def __init__(self, config: LocalizerConfig):
        super().__init__()
        self.config = config
        self.layers = self.add_module(
            "layers", build_sequential(localizer_layer_specs(config))
        )

    def forward(self, x: Tensor) -> Tensor:
        size = self.config.input_size
        if x.ndim == 4:
            x = x.reshape(x.shape[0], x.shape[1], 1, size, size)
        if x.ndim != 5 or x.shape[1:] != (1, 1, size, size):
            raise ShapeMismatch(
                f"Localizer expects crops of shape (N, 1, {size}, {size}), "
                f"got {x.shape}."
            )
        return self.layers(x)

    def predict_offsets(
        self, crops: Union[np.ndarray, Tensor], clamp_mm: Optional[float] = None
    ) -> np.ndarray:
        """Predicts offsets in eval mode without recording a tape.

        Args:
            crops (Union[np.ndarray, Tensor]): Patches of shape (N, 1, S, S).
            clamp_mm (Optional[float]): Maximum offset norm, if any.

        Returns:
            np.ndarray: (N, 3) offsets in mm.
        """
        return forward_localizer(self, crops, clamp_mm)


def build_localizer(
    cfg: LocalizerConfig, seed: Optional[int] = 0, sigma: float = DEFAULT_SIGMA
) -> LocalizationNet:
    """
    Args:
        cfg (LocalizerConfig): Architecture.
        seed (Optional[int]): Seed of the weight draw.
        sigma (float): Standard deviation of initial weights.

    Returns:
        LocalizationNet: Initialized network.
    """
    model = LocalizationNet(cfg)
    initialize(model, sigma, seed)
    return model


def forward_localizer(
    model: LocalizationNet,
    crop: Union[np.ndarray, Tensor],
    clamp_mm: Optional[float] = None,
) -> np.ndarray:
    """Runs the localizer on a batch of depth crops.

    Args:
        model (LocalizationNet): The network.
        crop (Union[np.ndarray, Tensor]): (N, 1, S, S) normalized crops.
        clamp_mm (Optional[float]): Maximum offset norm, if any.

    Returns:
        np.ndarray: (N, 3) offsets in mm.
    """
    x = crop if isinstance(crop, Tensor) else Tensor(np.asarray(crop))
    model.eval()
    with no_grad():
        offsets = model(x).data.astype(np.float64)
    if clamp_mm is not None:
        offsets = np.stack([clamp_offset(o, clamp_mm) for o in offsets])
    return offsets
