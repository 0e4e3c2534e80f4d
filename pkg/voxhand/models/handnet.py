# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

"""The voxel-to-coordinates hand pose network.

Layer plan for the default configuration (F = 21 joints, input 88^3):

    conv16 conv16 pool                      88 -> 44
    residual(conv32 conv32, projected skip) pool   44 -> 22
    residual(conv64 conv64, projected skip) pool   22 -> 11
    conv64 conv64
    transpose-conv32 (k=2, s=2)             11 -> 22
    conv32 conv32 conv21(k=1)
    adaptive average pool to 4^3, flatten
    FC(F*44) dropout FC(F*11) dropout FC(F*3), scaled to mm

Every convolution and the transpose convolution are followed by BatchNorm and
ReLU. The network predicts joints relative to the center of its input grid.
"""

import warnings
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic.dataclasses import dataclass

from voxhand.errors import ShapeMismatch
from voxhand.ingest.frame import JointSet
from voxhand.nn import functional as F
from voxhand.nn.layers import (
    Conv3d,
    Dropout,
    LayerKind,
    LayerSpec,
    Mode,
    Module,
    build_sequential,
)
from voxhand.nn.optim import DEFAULT_SIGMA, initialize
from voxhand.nn.tensor import Tensor, no_grad

FC_MULTIPLIERS = (44, 11, 3)
NUM_POOLS = 3


@dataclass(frozen=True)
class HandNetConfig:
    """Hyperparameters of the hand pose network.

    Args:
        input_size (int): Voxels per axis of the input grid. (default: `88`)
        num_joints (int): Joints F regressed per frame. (default: `21`)
        channels (Tuple[int, ...]): Filters of the first pair, the two residual
            pairs, the post-pool pair, and the transpose/upsampled pair.
        adaptive_pool_size (int): Bins per axis before the FC head. (default: `4`)
        dropout (float): Dropout rate between FC layers. (default: `0.5`)
        output_scale_mm (float): mm per unit of the last FC output.
        bn_momentum (float): BatchNorm running-statistics momentum.
        bn_eps (float): BatchNorm variance epsilon.
    """

    input_size: int = 88
    num_joints: int = 21
    channels: Tuple[int, int, int, int, int] = (16, 32, 64, 64, 32)
    adaptive_pool_size: int = 4
    dropout: float = 0.5
    output_scale_mm: float = 150.0
    bn_momentum: float = 0.9
    bn_eps: float = 1e-5

    def __post_init__(self) -> None:
        self._validate_input_size()
        if self.num_joints < 1:
            raise ValueError(f"num_joints must be positive, got {self.num_joints}.")
        if min(self.channels) < 1:
            raise ValueError(f"Channel counts must be positive, got {self.channels}.")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"Dropout rate must be in [0, 1), got {self.dropout}.")
        if self.output_scale_mm <= 0:
            raise ValueError(
                f"output_scale_mm must be positive, got {self.output_scale_mm}."
            )

    @property
    def fc_units(self) -> Tuple[int, int, int]:
        return tuple(self.num_joints * c for c in FC_MULTIPLIERS)

    def _validate_input_size(self) -> None:
        upsampled = (self.input_size // 2**NUM_POOLS) * 2
        if self.adaptive_pool_size < 1 or upsampled < self.adaptive_pool_size:
            raise ValueError(
                f"input_size {self.input_size} is too small: the upsampled grid "
                f"({upsampled}) must hold adaptive_pool_size "
                f"{self.adaptive_pool_size} bins."
            )
        if self.input_size % 2**NUM_POOLS:
            warnings.warn(
                f"input_size {self.input_size} is not divisible by 8; pooling "
                f"drops trailing voxels."
            )


def _conv_block(
    in_channels: int, out_channels: int, cfg: HandNetConfig, kernel: int = 3
) -> List[LayerSpec]:
    pad = kernel // 2
    return [
        LayerSpec(
            kind=LayerKind.Conv3D,
            in_channels=in_channels,
            filters=out_channels,
            kernel=(kernel,) * 3,
            padding=(pad,) * 3,
        ),
        LayerSpec(
            kind=LayerKind.BatchNorm,
            filters=out_channels,
            momentum=cfg.bn_momentum,
            eps=cfg.bn_eps,
        ),
        LayerSpec(kind=LayerKind.ReLU),
    ]


def _residual(in_channels: int, out_channels: int, cfg: HandNetConfig) -> LayerSpec:
    body = _conv_block(in_channels, out_channels, cfg) + _conv_block(
        out_channels, out_channels, cfg
    )
    return LayerSpec(
        kind=LayerKind.ResidualAdd,
        in_channels=in_channels,
        filters=out_channels,
        body=tuple(body),
    )


def handnet_layer_specs(cfg: HandNetConfig) -> List[LayerSpec]:
    """
    Args:
        cfg (HandNetConfig): Network configuration.

    Returns:
        List[LayerSpec]: The top-level layer plan, in order.
    """
    c1, c2, c3, c4, c5 = cfg.channels
    joints = cfg.num_joints
    pool = LayerSpec(kind=LayerKind.MaxPool3D, kernel=(2, 2, 2), stride=(2, 2, 2))
    fc1, fc2, fc3 = cfg.fc_units

    specs = _conv_block(1, c1, cfg) + _conv_block(c1, c1, cfg) + [pool]
    specs += [_residual(c1, c2, cfg), pool]
    specs += [_residual(c2, c3, cfg), pool]
    specs += _conv_block(c3, c4, cfg) + _conv_block(c4, c4, cfg)
    specs += [
        LayerSpec(
            kind=LayerKind.ConvTranspose3D,
            in_channels=c4,
            filters=c5,
            kernel=(2, 2, 2),
            stride=(2, 2, 2),
        ),
        LayerSpec(
            kind=LayerKind.BatchNorm,
            filters=c5,
            momentum=cfg.bn_momentum,
            eps=cfg.bn_eps,
        ),
        LayerSpec(kind=LayerKind.ReLU),
    ]
    specs += _conv_block(c5, c5, cfg) + _conv_block(c5, c5, cfg)
    specs += _conv_block(c5, joints, cfg, kernel=1)
    specs += [
        LayerSpec(kind=LayerKind.AdaptiveAvgPool3D, output_size=cfg.adaptive_pool_size),
        LayerSpec(kind=LayerKind.Flatten),
        LayerSpec(
            kind=LayerKind.FullyConnected,
            in_channels=joints * cfg.adaptive_pool_size**3,
            filters=fc1,
        ),
        LayerSpec(kind=LayerKind.Dropout, rate=cfg.dropout),
        LayerSpec(kind=LayerKind.FullyConnected, in_channels=fc1, filters=fc2),
        LayerSpec(kind=LayerKind.Dropout, rate=cfg.dropout),
        LayerSpec(kind=LayerKind.FullyConnected, in_channels=fc2, filters=fc3),
        LayerSpec(kind=LayerKind.Scale, factor=cfg.output_scale_mm),
    ]
    return specs


def _walk(specs: Sequence[LayerSpec]) -> List[LayerSpec]:
    flat = []
    for spec in specs:
        flat.append(spec)
        flat.extend(_walk(spec.body))
    return flat


class HandNet(Module):
    """Regresses F x 3 joint coordinates from a binary voxel grid.

    Args:
        config (HandNetConfig): Architecture.
        seed (Optional[int]): Seed of the dropout masks.
    """

    def __init__(self, config: HandNetConfig, seed: Optional[int] = None):
        super().__init__()
        self.config = config
        self.specs = handnet_layer_specs(config)
        self.layers = self.add_module("layers", build_sequential(self.specs, seed))

    def forward(self, x: Tensor) -> Tensor:
        size = self.config.input_size
        if x.ndim != 5 or x.shape[1] != 1 or x.shape[2:] != (size, size, size):
            raise ShapeMismatch(
                f"HandNet expects input of shape (N, 1, {size}, {size}, {size}), "
                f"got {x.shape}."
            )
        return self.layers(x)

    def reseed(self, seed: Optional[int]) -> None:
        """Reseeds every dropout layer; layer i gets `seed * 1000 + i`."""
        for index, module in enumerate(self.modules()):
            if isinstance(module, Dropout):
                module.reseed(None if seed is None else seed * 1000 + index)

    def conv3d_count(self) -> int:
        return sum(isinstance(m, Conv3d) for m in self.modules())

    def fc_widths(self) -> List[int]:
        return [
            spec.filters for spec in self.specs if spec.kind == LayerKind.FullyConnected
        ]

    def spatial_trace(self) -> List[int]:
        """Grid edge after the input, each pool and the transpose convolution.

        Returns:
            List[int]: e.g. [88, 44, 22, 11, 22] for the default input.
        """
        size = self.config.input_size
        trace = [size]
        for spec in _walk(self.specs):
            if spec.kind == LayerKind.MaxPool3D:
                size = F.conv_output_size(size, spec.kernel[0], spec.stride[0])
                trace.append(size)
            elif spec.kind == LayerKind.ConvTranspose3D:
                size = F.conv_transpose_output_size(
                    size, spec.kernel[0], spec.stride[0]
                )
                trace.append(size)
        return trace

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def model_size_bytes(self) -> int:
        """Bytes of all parameters and BatchNorm buffers at 32-bit precision."""
        buffers = sum(b.size for _, b in self.named_buffers())
        return 4 * (self.parameter_count() + buffers)


def build_handnet(
    cfg: HandNetConfig, seed: Optional[int] = 0, sigma: float = DEFAULT_SIGMA
) -> HandNet:
    """Builds and initializes the hand pose network.

    Args:
        cfg (HandNetConfig): Architecture.
        seed (Optional[int]): Seed of the weight draw and dropout masks.
        sigma (float): Standard deviation of initial weights.

    Returns:
        HandNet: Model in training mode.
    """
    model = HandNet(cfg, seed)
    initialize(model, sigma, seed)
    return model


def as_grid_tensor(grids: Union[Tensor, np.ndarray]) -> Tensor:
    """Converts a (N, D, H, W) or (N, 1, D, H, W) occupancy batch to a Tensor."""
    if isinstance(grids, Tensor):
        return grids
    grids = np.asarray(grids)
    if grids.ndim == 4:
        grids = grids[:, None]
    return Tensor(grids)


def forward_handnet(
    model: HandNet,
    grid_batch: Union[Tensor, np.ndarray],
    mode: Mode = Mode.Eval,
    references: Optional[np.ndarray] = None,
) -> List[JointSet]:
    """Runs the network and returns absolute joint coordinates.

    Args:
        model (HandNet): The network.
        grid_batch (Union[Tensor, np.ndarray]): Occupancy grids, (N, 1, D, D, D).
        mode (Mode): `Mode.Eval` runs without recording a tape.
        references (Optional[np.ndarray]): (N, 3) points in mm that the network
            output is relative to; zeros when omitted.

    Returns:
        List[JointSet]: One F x 3 joint set per grid, in mm.

    Raises:
        ShapeMismatch: If the grid edge differs from the model's input size.
    """
    x = as_grid_tensor(grid_batch)
    model.train(mode == Mode.Train)
    if mode == Mode.Eval:
        with no_grad():
            out = model(x)
    else:
        out = model(x)
    joints = out.data.astype(np.float64).reshape(x.shape[0], -1, 3)
    if references is not None:
        joints = joints + np.asarray(references, dtype=np.float64).reshape(-1, 1, 3)
    return [JointSet(joints=j) for j in joints]
