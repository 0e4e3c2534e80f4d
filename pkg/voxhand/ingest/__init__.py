# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

from voxhand.ingest.frame import CameraIntrinsics, DepthFrame, JointSet
from voxhand.ingest.msra import (
    load_msra_frame,
    load_msra_joints,
    save_msra_frame,
    save_msra_joints,
)
from voxhand.ingest.synthetic import synth_frame, write_synthetic_dataset
from voxhand.ingest.dataset import (
    HandDataset,
    MsraDataset,
    SampleRef,
    SyntheticDataset,
)

__all__ = [
    "CameraIntrinsics",
    "DepthFrame",
    "HandDataset",
    "JointSet",
    "MsraDataset",
    "SampleRef",
    "SyntheticDataset",
    "load_msra_frame",
    "load_msra_joints",
    "save_msra_frame",
    "save_msra_joints",
    "synth_frame",
    "write_synthetic_dataset",
]
