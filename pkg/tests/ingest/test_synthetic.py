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
from hypothesis import given, settings
from hypothesis import strategies as st

from voxhand.geometry import project_world_to_pixel
from voxhand.ingest.frame import CameraIntrinsics
from voxhand.ingest.msra import load_msra_frame, load_msra_joints
from voxhand.ingest.synthetic import synth_frame, write_synthetic_dataset

CAMERA = CameraIntrinsics(fp=241.42, fq=241.42, cp=160.0, cq=120.0)


def test_synth_frame_is_deterministic(intrinsics: CameraIntrinsics) -> None:
    """Tests that equal seeds render identical frames and joints.

    Args:
        intrinsics (CameraIntrinsics): Camera fixture.
    """
    frame_a, joints_a = synth_frame(0, intrinsics)
    frame_b, joints_b = synth_frame(0, intrinsics)
    assert frame_a.bbox == frame_b.bbox
    assert frame_a.depth.tobytes() == frame_b.depth.tobytes()
    assert joints_a == joints_b


def test_synth_frame_seeds_differ(intrinsics: CameraIntrinsics) -> None:
    """Tests that different seeds render different frames.

    Args:
        intrinsics (CameraIntrinsics): Camera fixture.
    """
    frame_a, _ = synth_frame(0, intrinsics)
    frame_b, _ = synth_frame(1, intrinsics)
    assert not np.array_equal(frame_a.to_image(), frame_b.to_image())


def test_synth_frame_depth_range(intrinsics: CameraIntrinsics) -> None:
    """Tests that every return lies between 400 and 800 mm.

    Args:
        intrinsics (CameraIntrinsics): Camera fixture.
    """
    for seed in range(5):
        frame, joints = synth_frame(seed, intrinsics)
        positive = frame.depth[frame.depth > 0]
        assert positive.size > 0
        assert positive.min() >= 400.0 and positive.max() <= 800.0
        assert joints.num_joints == 21


def test_synth_joints_project_inside_bbox(intrinsics: CameraIntrinsics) -> None:
    """Tests that every joint projects back inside the frame's bbox.

    Args:
        intrinsics (CameraIntrinsics): Camera fixture.
    """
    for seed in range(10):
        frame, joints = synth_frame(seed, intrinsics)
        left, top, right, bottom = frame.bbox
        pixels = project_world_to_pixel(joints.joints, intrinsics)
        assert np.all(pixels[:, 0] >= left) and np.all(pixels[:, 0] < right)
        assert np.all(pixels[:, 1] >= top) and np.all(pixels[:, 1] < bottom)


@pytest.mark.slow
@settings(max_examples=1000, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_synth_frame_invariants(seed: int) -> None:
    """Tests frame validity, depth range and joint projection for any seed."""
    frame, joints = synth_frame(seed, CAMERA)
    left, top, right, bottom = frame.bbox
    assert 0 <= left < right <= frame.width and 0 <= top < bottom <= frame.height
    assert frame.depth.shape == (bottom - top, right - left)
    assert np.all(np.isfinite(frame.depth)) and np.all(frame.depth >= 0)
    positive = frame.depth[frame.depth > 0]
    assert positive.size > 0
    assert positive.min() >= 400.0 and positive.max() <= 800.0

    assert joints.num_joints == 21
    pixels = project_world_to_pixel(joints.joints, CAMERA)
    assert np.all(pixels[:, 0] >= left) and np.all(pixels[:, 0] < right)
    assert np.all(pixels[:, 1] >= top) and np.all(pixels[:, 1] < bottom)


def test_write_synthetic_dataset(tmp_path: Any, intrinsics: CameraIntrinsics) -> None:
    """Tests the MSRA directory layout written for synthetic data.

    Args:
        tmp_path (Any): pytest temporary directory.
        intrinsics (CameraIntrinsics): Camera fixture.
    """
    root = str(tmp_path)
    written = write_synthetic_dataset(root, intrinsics, ["P0", "P1"], ["1"], 3)
    assert len(written) == 6

    joints = load_msra_joints(os.path.join(root, "P1", "1", "joint.txt"))
    assert len(joints) == 3
    path = os.path.join(root, "P1", "1", "000002_depth.bin")
    frame = load_msra_frame(path, intrinsics)
    assert frame.width == 320 and frame.height == 240
