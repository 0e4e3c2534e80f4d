# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

"""3D augmentation by scaling, translation and XY rotation.

A voxel coordinate v is mapped about the grid center c as

    v' = (v - c) * s + t
    v'' = c + R(theta) v'   (x and y only, z unchanged)

scale first, then translate, then rotate.
"""

from typing import Sequence, Tuple

import numpy as np
from pydantic.dataclasses import dataclass

from voxhand.geometry import PointCloud
from voxhand.ingest.frame import JointSet
from voxhand.voxelize import VoxelGrid

SCALE_RANGE = (0.7, 1.2)
TRANSLATION_RANGE = (-7.0, 7.0)
ANGLE_RANGE_DEG = (-40.0, 40.0)


@dataclass(frozen=True)
class AugmentParams:
    """One draw of augmentation parameters.

    Args:
        scale (float): Scale factor s in [0.7, 1.2].
        translation (Tuple[float, float, float]): Translation t in voxels, each
            component in [-7, 7].
        angle (float): XY rotation angle theta in degrees, in [-40, 40].
    """

    scale: float = 1.0
    translation: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    angle: float = 0.0

    def __post_init__(self) -> None:
        self._validate_scale()
        self._validate_translation()
        self._validate_angle()

    @property
    def rotation(self) -> np.ndarray:
        """
        Returns:
            np.ndarray: The proper 2x2 rotation matrix of `angle`.
        """
        return rotation_matrix(self.angle)

    def _validate_scale(self) -> None:
        low, high = SCALE_RANGE
        if not low <= self.scale <= high:
            raise ValueError(f"Scale {self.scale} outside [{low}, {high}].")

    def _validate_translation(self) -> None:
        low, high = TRANSLATION_RANGE
        if len(self.translation) != 3 or any(
            not low <= t <= high for t in self.translation
        ):
            raise ValueError(
                f"Translation {self.translation} must have 3 components in "
                f"[{low}, {high}]."
            )

    def _validate_angle(self) -> None:
        low, high = ANGLE_RANGE_DEG
        if not low <= self.angle <= high:
            raise ValueError(f"Angle {self.angle} outside [{low}, {high}] degrees.")


def sample_params(rng_seed: int) -> AugmentParams:
    """Draws augmentation parameters uniformly from their ranges.

    Args:
        rng_seed (int): Seed; equal seeds give equal parameters.

    Returns:
        AugmentParams: The draw.
    """
    rng = np.random.default_rng(rng_seed)
    scale = rng.uniform(*SCALE_RANGE)
    translation = rng.uniform(*TRANSLATION_RANGE, size=3)
    angle = rng.uniform(*ANGLE_RANGE_DEG)
    return AugmentParams(
        scale=float(scale),
        translation=tuple(float(t) for t in translation),
        angle=float(angle),
    )


def rotation_matrix(angle: float) -> np.ndarray:
    """
    Args:
        angle (float): Angle in degrees.

    Returns:
        np.ndarray: [[cos, -sin], [sin, cos]] of `angle`.
    """
    theta = np.deg2rad(angle)
    return np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])


def transform(
    v: np.ndarray,
    scale: float,
    translation: Sequence[float],
    angle: float,
    center: Sequence[float] = (0.0, 0.0, 0.0),
) -> np.ndarray:
    """Scale, translate and XY-rotate coordinates without range checks.

    Args:
        v (np.ndarray): Coordinates, shape (3,) or (N, 3).
        scale (float): Scale factor.
        translation (Sequence[float]): Translation (tx, ty, tz).
        angle (float): XY rotation in degrees.
        center (Sequence[float]): Fixed point of scale and rotation.

    Returns:
        np.ndarray: Transformed coordinates with the shape of `v`.
    """
    v = np.asarray(v, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    moved = (v.reshape(-1, 3) - center) * scale + np.asarray(translation)
    moved[:, :2] = moved[:, :2] @ rotation_matrix(angle).T
    return (moved + center).reshape(v.shape)


def apply(
    v: np.ndarray,
    params: AugmentParams,
    center: Sequence[float] = (0.0, 0.0, 0.0),
) -> np.ndarray:
    """Applies scale, translation and XY rotation to voxel coordinates.

    Args:
        v (np.ndarray): Continuous voxel coordinates, shape (3,) or (N, 3).
        params (AugmentParams): The transform.
        center (Sequence[float]): Fixed point of scale and rotation, in voxels.

    Returns:
        np.ndarray: Transformed coordinates with the shape of `v`.
    """
    return transform(v, params.scale, params.translation, params.angle, center)


def apply_inverse(
    v: np.ndarray,
    params: AugmentParams,
    center: Sequence[float] = (0.0, 0.0, 0.0),
) -> np.ndarray:
    """Inverse of `apply`.

    Args:
        v (np.ndarray): Transformed coordinates, shape (3,) or (N, 3).
        params (AugmentParams): The transform to undo.
        center (Sequence[float]): Fixed point used by `apply`.

    Returns:
        np.ndarray: Original coordinates.
    """
    v = np.asarray(v, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    moved = v.reshape(-1, 3) - center
    # R is orthonormal, so its inverse is its transpose.
    moved[:, :2] = moved[:, :2] @ params.rotation
    moved = (moved - np.asarray(params.translation)) / params.scale
    return (moved + center).reshape(v.shape)


def augment_grid(grid: VoxelGrid, params: AugmentParams) -> VoxelGrid:
    """Resamples a grid through the augmentation by inverse mapping.

    Every output voxel center is mapped through `apply_inverse` about the grid
    center and takes the occupancy of the voxel it lands in; samples that land
    outside the grid are empty.

    Args:
        grid (VoxelGrid): Grid to augment.
        params (AugmentParams): The transform.

    Returns:
        VoxelGrid: Grid of identical size, pitch and origin.
    """
    size = np.asarray(grid.size)
    idx = np.stack(
        np.meshgrid(*(np.arange(n) for n in grid.size), indexing="ij"), axis=-1
    ).reshape(-1, 3)
    source = np.floor(apply_inverse(idx + 0.5, params, size / 2.0)).astype(np.int64)
    inside = np.all((source >= 0) & (source < size), axis=1)

    occupancy = np.zeros(int(np.prod(size)), dtype=np.uint8)
    src = source[inside]
    occupancy[inside] = grid.occupancy[src[:, 0], src[:, 1], src[:, 2]]
    return VoxelGrid(
        size=grid.size,
        pitch=grid.pitch,
        origin=grid.origin,
        occupancy=occupancy.reshape(tuple(grid.size)),
    )


def augment_joints(
    joints: JointSet, params: AugmentParams, grid_frame: VoxelGrid
) -> JointSet:
    """Moves ground-truth joints with the same transform as their grid.

    Joints are converted to the grid's voxel coordinates, mapped forward with
    `apply` about the grid center and converted back to mm.

    Args:
        joints (JointSet): Joints in mm.
        params (AugmentParams): The transform.
        grid_frame (VoxelGrid): Grid whose origin and pitch define voxel space.

    Returns:
        JointSet: Transformed joints in mm.
    """
    origin = np.asarray(grid_frame.origin)
    voxels = (joints.joints - origin) / grid_frame.pitch
    moved = apply(voxels, params, np.asarray(grid_frame.size) / 2.0)
    return JointSet(joints=moved * grid_frame.pitch + origin)


def augment_points(
    cloud: PointCloud, params: AugmentParams, center: Sequence[float], pitch: float
) -> PointCloud:
    """Applies the augmentation to a cloud in mm before voxelization.

    Translation is expressed in voxels of edge `pitch`; scale and rotation act
    about `center`.

    Args:
        cloud (PointCloud): Points in mm.
        params (AugmentParams): The transform.
        center (Sequence[float]): Reference point in mm.
        pitch (float): Voxel edge in mm.

    Returns:
        PointCloud: Augmented points.
    """
    center = np.asarray(center, dtype=np.float64)
    voxels = (cloud.points - center) / pitch
    return PointCloud(points=apply(voxels, params) * pitch + center)


def augment_joints_about(
    joints: JointSet, params: AugmentParams, center: Sequence[float], pitch: float
) -> JointSet:
    """Counterpart of `augment_points` for joints.

    Args:
        joints (JointSet): Joints in mm.
        params (AugmentParams): The transform.
        center (Sequence[float]): Reference point in mm.
        pitch (float): Voxel edge in mm.

    Returns:
        JointSet: Augmented joints.
    """
    center = np.asarray(center, dtype=np.float64)
    voxels = (joints.joints - center) / pitch
    return JointSet(joints=apply(voxels, params) * pitch + center)
