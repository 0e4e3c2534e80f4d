# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

from voxhand.models.handnet import (
    HandNet,
    HandNetConfig,
    build_handnet,
    forward_handnet,
    handnet_layer_specs,
)
from voxhand.models.localizer import (
    LocalizationNet,
    LocalizerConfig,
    build_localizer,
    forward_localizer,
)

__all__ = [
    "HandNet",
    "HandNetConfig",
    "LocalizationNet",
    "LocalizerConfig",
    "build_handnet",
    "build_localizer",
    "forward_handnet",
    "forward_localizer",
    "handnet_layer_specs",
]
