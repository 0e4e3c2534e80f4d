# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from voxhand.augment import (
    AugmentParams,
    apply,
    apply_inverse,
    augment_grid,
    augment_joints,
    augment_joints_about,
    augment_points,
    rotation_matrix,
    sample_params,
    transform,
)
from voxhand.geometry import PointCloud
from voxhand.ingest.frame import JointSet
from voxhand.voxelize import VoxelGrid, voxelize

params_strategy = st.builds(
    AugmentParams,
    scale=st.floats(0.7, 1.2),
    translation=st.tuples(*(st.floats(-7.0, 7.0) for _ in range(3))),
    angle=st.floats(-40.0, 40.0),
)


def _grid(size: int, occupied: np.ndarray) -> VoxelGrid:
    occupancy = np.zeros((size, size, size), dtype=np.uint8)
    occupancy[tuple(np.asarray(occupied).T)] = 1
    return VoxelGrid(
        size=(size, size, size), pitch=1.0, origin=(0.0, 0.0, 0.0), occupancy=occupancy
    )


def test_sample_params_ranges() -> None:
    """Tests that ten thousand draws stay inside the documented ranges."""
    draws = [sample_params(seed) for seed in range(10_000)]
    scales = np.array([p.scale for p in draws])
    translations = np.array([p.translation for p in draws])
    angles = np.array([p.angle for p in draws])

    assert scales.min() >= 0.7 and scales.max() <= 1.2
    assert translations.min() >= -7.0 and translations.max() <= 7.0
    assert angles.min() >= -40.0 and angles.max() <= 40.0
    # Uniform draws reach close to both ends.
    assert scales.min() < 0.71 and scales.max() > 1.19
    assert angles.min() < -39.0 and angles.max() > 39.0


def test_sample_params_deterministic() -> None:
    """Tests that equal seeds give equal parameters."""
    assert sample_params(42) == sample_params(42)
    assert sample_params(42) != sample_params(43)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"scale": 2.0},
        {"scale": 0.5},
        {"translation": (8.0, 0.0, 0.0)},
        {"translation": (0.0, 0.0)},
        {"angle": 45.0},
    ],
)
def test_params_out_of_range(kwargs: dict) -> None:
    """Tests that parameters outside the ranges are rejected.

    Args:
        kwargs (dict): Offending field.
    """
    with pytest.raises(ValueError):
        AugmentParams(**kwargs)


def test_rotation_quarter_turn() -> None:
    """Tests a counter-clockwise quarter turn in the XY plane."""
    np.testing.assert_allclose(
        transform(np.array([1.0, 0.0, 0.0]), 1.0, (0, 0, 0), 90.0),
        [0.0, 1.0, 0.0],
        atol=1e-12,
    )
    matrix = rotation_matrix(25.0)
    np.testing.assert_allclose(matrix @ matrix.T, np.eye(2), atol=1e-12)
    assert np.linalg.det(matrix) == pytest.approx(1.0)


def test_rotation_keeps_norm_and_z() -> None:
    """Tests that rotation alone keeps lengths and the z axis."""
    v = np.random.default_rng(0).normal(size=(50, 3))
    rotated = apply(v, AugmentParams(angle=33.0))
    np.testing.assert_allclose(
        np.linalg.norm(rotated, axis=1), np.linalg.norm(v, axis=1)
    )
    np.testing.assert_array_equal(rotated[:, 2], v[:, 2])


def test_scale_ratio() -> None:
    """Tests that pairwise distances grow by the scale factor."""
    params = AugmentParams(scale=1.15, translation=(3.0, -2.0, 1.0), angle=-20.0)
    a, b = np.random.default_rng(1).normal(size=(2, 3)) * 10
    moved_a, moved_b = apply(np.stack([a, b]), params, center=(5.0, 5.0, 5.0))
    assert np.linalg.norm(moved_a - moved_b) == pytest.approx(
        1.15 * np.linalg.norm(a - b)
    )


@settings(max_examples=100)
@given(params=params_strategy)
def test_apply_inverse_round_trip(params: AugmentParams) -> None:
    """Tests that `apply_inverse` undoes `apply`."""
    v = np.random.default_rng(2).uniform(-50, 50, size=(20, 3))
    center = (3.0, -1.0, 2.0)
    np.testing.assert_allclose(
        apply_inverse(apply(v, params, center), params, center), v, atol=1e-9
    )


def test_grid_translation_round_trip() -> None:
    """Tests that +7 then -7 voxels restores interior voxels exactly."""
    rng = np.random.default_rng(3)
    occupied = rng.integers(8, 24, size=(40, 3))
    grid = _grid(32, occupied)
    forward = augment_grid(grid, AugmentParams(translation=(7.0, 7.0, 7.0)))
    assert forward.occupancy[tuple((occupied + 7).T)].all()
    back = augment_grid(forward, AugmentParams(translation=(-7.0, -7.0, -7.0)))
    assert back == grid


@pytest.mark.parametrize("angle", [-40.0, 40.0])
def test_grid_rotation_keeps_center_voxel(angle: float) -> None:
    """Tests that the voxel at the grid center stays occupied.

    Args:
        angle (float): Rotation angle in degrees.
    """
    grid = _grid(32, np.array([[16, 16, 16]]))
    rotated = augment_grid(grid, AugmentParams(angle=angle))
    assert rotated.occupancy[16, 16, 16] == 1
    assert rotated.size == grid.size and rotated.origin == grid.origin


def test_joint_translation_in_mm() -> None:
    """Tests that a one-voxel translation moves joints by one pitch."""
    joints = JointSet(joints=np.random.default_rng(4).normal(size=(21, 3)) * 40)
    moved = augment_joints_about(
        joints, AugmentParams(translation=(1.0, 0.0, 0.0)), (0.0, 0.0, 500.0), 10.0
    )
    np.testing.assert_allclose(moved.joints - joints.joints, [[10.0, 0.0, 0.0]] * 21)


@settings(max_examples=50)
@given(params=params_strategy)
def test_points_and_joints_move_together(params: AugmentParams) -> None:
    """Tests that clouds, joints and grid-frame joints share one transform."""
    center = np.array([12.0, -30.0, 520.0])
    xyz = center + np.random.default_rng(5).uniform(-100, 100, size=(21, 3))
    cloud = augment_points(PointCloud(points=xyz), params, center, 3.125)
    joints = augment_joints_about(JointSet(joints=xyz), params, center, 3.125)
    np.testing.assert_allclose(cloud.points, joints.joints, atol=1e-9)

    grid = voxelize(PointCloud(points=xyz), center, 96, 3.125)
    framed = augment_joints(JointSet(joints=xyz), params, grid)
    np.testing.assert_allclose(framed.joints, joints.joints, atol=1e-6)


def test_identity_params() -> None:
    """Tests that default parameters leave grids unchanged."""
    rng = np.random.default_rng(6)
    grid = _grid(16, rng.integers(0, 16, size=(30, 3)))
    assert augment_grid(grid, AugmentParams()) == grid
