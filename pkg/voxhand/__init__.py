# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

__version__ = "0.1.0"

from voxhand.config import RunConfig, load_config  # noqa: E402
from voxhand.models.handnet import HandNet, build_handnet, forward_handnet  # noqa: E402
from voxhand.pipeline import prepare_sample  # noqa: E402

__all__ = [
    "HandNet",
    "RunConfig",
    "build_handnet",
    "forward_handnet",
    "load_config",
    "prepare_sample",
]
