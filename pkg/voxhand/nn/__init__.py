# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

from voxhand.nn.tensor import (
    Parameter,
    Tensor,
    default_dtype,
    get_default_dtype,
    is_grad_enabled,
    no_grad,
    set_default_dtype,
)
from voxhand.nn.layers import (
    AdaptiveAvgPool3d,
    BatchNorm3d,
    ChannelProjection,
    Conv3d,
    ConvTranspose3d,
    Dropout,
    Flatten,
    LayerKind,
    LayerSpec,
    Linear,
    MaxPool3d,
    Mode,
    Module,
    ReLU,
    ResidualBlock,
    Scale,
    Sequential,
    build_layer,
    build_sequential,
    recalibrate_batch_norm,
)
from voxhand.nn.optim import Adam, adam_step, init_weights, initialize
from voxhand.nn.checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "Adam",
    "AdaptiveAvgPool3d",
    "BatchNorm3d",
    "ChannelProjection",
    "Conv3d",
    "ConvTranspose3d",
    "Dropout",
    "Flatten",
    "LayerKind",
    "LayerSpec",
    "Linear",
    "MaxPool3d",
    "Mode",
    "Module",
    "Parameter",
    "ReLU",
    "ResidualBlock",
    "Scale",
    "Sequential",
    "Tensor",
    "adam_step",
    "build_layer",
    "build_sequential",
    "default_dtype",
    "get_default_dtype",
    "init_weights",
    "initialize",
    "is_grad_enabled",
    "load_checkpoint",
    "no_grad",
    "recalibrate_batch_norm",
    "save_checkpoint",
    "set_default_dtype",
]
