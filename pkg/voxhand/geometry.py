# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

"""Hand segmentation, localization and pixel/world projection.

All depth values and world coordinates are in mm. World coordinates follow the
camera frame: x right, y down, z into the scene.
"""

import logging
import warnings
from enum import Enum
from typing import TYPE_CHECKING, Sequence, Tuple

import numpy as np
from pydantic.dataclasses import dataclass

from voxhand.errors import EmptyCloud, EmptyFrame
from voxhand.ingest.frame import ArrayConfig, CameraIntrinsics, DepthFrame

if TYPE_CHECKING:
    from voxhand.models.localizer import LocalizationNet

Point3 = Tuple[float, float, float]

DEFAULT_BAND_MM = 400.0
DEFAULT_OFFSET_CLAMP_MM = 150.0


class ReferenceSource(str, Enum):
    CENTER_OF_MASS = "CenterOfMass"
    REFINED = "Refined"


@dataclass(frozen=True, eq=False, config=ArrayConfig)
class PointCloud:
    """A set of 3D points in mm.

    Args:
        points (np.ndarray): Array of shape (N, 3); N may be zero.
    """

    points: np.ndarray

    def __post_init__(self) -> None:
        points = np.array(self.points, dtype=np.float64, copy=True).reshape(-1, 3)
        if not np.all(np.isfinite(points)):
            raise ValueError("Point coordinates must all be finite.")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return self.points.shape[0]

    def translated(self, offset: Sequence[float]) -> "PointCloud":
        """
        Args:
            offset (Sequence[float]): Translation (x, y, z) in mm.

        Returns:
            PointCloud: A copy of this cloud moved by `offset`.
        """
        return PointCloud(points=self.points + np.asarray(offset, dtype=np.float64))


@dataclass(frozen=True)
class ReferencePoint:
    """The point a hand's voxel grid is centered on.

    Args:
        position (Tuple[float, float, float]): (x, y, z) in mm.
        source (ReferenceSource): Whether the point is the raw center of mass or
            a localizer-refined point.
    """

    position: Tuple[float, float, float]
    source: ReferenceSource

    def __post_init__(self) -> None:
        if not all(np.isfinite(self.position)):
            raise ValueError(f"Reference point {self.position} is not finite.")


def project_pixel_to_world(
    p: float, q: float, depth: float, intr: CameraIntrinsics
) -> Point3:
    """Projects a pixel with depth into camera coordinates.

    With a zero principal point this is exactly
    (p / fp * D, q / fq * D, D).

    Args:
        p (float): Pixel column.
        q (float): Pixel row.
        depth (float): Depth D(p, q) in mm.
        intr (CameraIntrinsics): Camera intrinsics.

    Returns:
        Tuple[float, float, float]: (x, y, z) in mm.
    """
    return (
        (p - intr.cp) / intr.fp * depth,
        (q - intr.cq) / intr.fq * depth,
        float(depth),
    )


def project_world_to_pixel(points: np.ndarray, intr: CameraIntrinsics) -> np.ndarray:
    """Inverse of `project_pixel_to_world` for points with z > 0.

    Args:
        points (np.ndarray): Array of shape (N, 3) in mm.
        intr (CameraIntrinsics): Camera intrinsics.

    Returns:
        np.ndarray: Array of shape (N, 3) holding (p, q, depth).
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    z = points[:, 2]
    return np.stack(
        [points[:, 0] * intr.fp / z + intr.cp, points[:, 1] * intr.fq / z + intr.cq, z],
        axis=1,
    )


def project_frame(frame: DepthFrame) -> PointCloud:
    """Projects every pixel with a depth return into world coordinates.

    Pixel coordinates are absolute image coordinates: the bbox offset is added
    before projecting.

    Args:
        frame (DepthFrame): Frame to project.

    Returns:
        PointCloud: One point per positive depth pixel, in row-major order.
    """
    rows, cols = np.nonzero(frame.depth > 0)
    depth = frame.depth[rows, cols].astype(np.float64)
    p = cols.astype(np.float64) + frame.left
    q = rows.astype(np.float64) + frame.top
    intr = frame.intrinsics
    points = np.stack(
        [(p - intr.cp) / intr.fp * depth, (q - intr.cq) / intr.fq * depth, depth],
        axis=1,
    )
    return PointCloud(points=points)


def segment_hand(frame: DepthFrame, band_mm: float = DEFAULT_BAND_MM) -> DepthFrame:
    """Keeps only depth values within `band_mm` of the nearest surface.

    Args:
        frame (DepthFrame): Frame to segment.
        band_mm (float): Width of the kept depth band. (default: `400.0`)

    Returns:
        DepthFrame: New frame where every depth outside
            [z_min, z_min + band_mm] is zero.

    Raises:
        ValueError: If `band_mm` is not positive.
        EmptyFrame: If the frame has no positive depth.
    """
    if band_mm <= 0:
        raise ValueError(f"band_mm must be positive, got {band_mm}.")
    positive = frame.depth > 0
    if not positive.any():
        raise EmptyFrame(
            f"Frame {frame.subject_id}/{frame.gesture_id}/{frame.frame_index} "
            "has no positive depth."
        )
    z_min = frame.depth[positive].min()
    keep = positive & (frame.depth <= z_min + band_mm)
    return frame.with_depth(np.where(keep, frame.depth, 0.0).astype(np.float32))


def center_of_mass(cloud: PointCloud) -> np.ndarray:
    """
    Args:
        cloud (PointCloud): Non-empty cloud.

    Returns:
        np.ndarray: Arithmetic mean (x, y, z) of the points.

    Raises:
        EmptyCloud: If the cloud has no points.
    """
    if len(cloud) == 0:
        raise EmptyCloud("Cannot compute the center of mass of an empty cloud.")
    return cloud.points.mean(axis=0)


def crop_cube(
    cloud: PointCloud, center: Sequence[float], half_extent: float
) -> PointCloud:
    """Keeps the points inside an axis-aligned cube.

    Args:
        cloud (PointCloud): Cloud to crop.
        center (Sequence[float]): Cube center in mm.
        half_extent (float): Half edge length in mm; the bound is inclusive.

    Returns:
        PointCloud: The points with |coord - center| <= half_extent on all axes.

    Raises:
        ValueError: If `half_extent` is not positive.
    """
    if half_extent <= 0:
        raise ValueError(f"half_extent must be positive, got {half_extent}.")
    offsets = np.abs(cloud.points - np.asarray(center, dtype=np.float64))
    return PointCloud(points=cloud.points[np.all(offsets <= half_extent, axis=1)])


def crop_depth_patch(
    frame: DepthFrame,
    com: Sequence[float],
    half_extent: float,
    size: int = 96,
    band_mm: float = DEFAULT_BAND_MM,
) -> np.ndarray:
    """Extracts the localizer's square input patch around a 3D point.

    The window covers `2 * half_extent` mm at the point's depth and is sampled on
    a `size` x `size` grid with nearest-neighbor lookup. Depth is mapped linearly
    from the segmentation band `[z_min, z_min + band_mm]` onto [-1, 1], where
    `z_min` is the nearest depth in the frame; missing returns map to 1 (far).

    Args:
        frame (DepthFrame): Segmented frame.
        com (Sequence[float]): Center of the window in world coordinates (mm).
        half_extent (float): Half size of the window in mm.
        size (int): Patch edge in pixels. (default: `96`)
        band_mm (float): Depth range of the segmentation band. (default: `400.0`)

    Returns:
        np.ndarray: float32 array of shape (size, size).
    """
    intr = frame.intrinsics
    center = project_world_to_pixel(np.asarray(com), intr)[0]
    half_p = half_extent * intr.fp / center[2]
    half_q = half_extent * intr.fq / center[2]
    steps = (np.arange(size) + 0.5) / size * 2.0 - 1.0
    cols = np.floor(center[0] + steps * half_p).astype(int) - frame.left
    rows = np.floor(center[1] + steps * half_q).astype(int) - frame.top

    valid_rows = (rows >= 0) & (rows < frame.rows)
    valid_cols = (cols >= 0) & (cols < frame.cols)
    patch = np.zeros((size, size), dtype=np.float64)
    sub = frame.depth[np.ix_(rows[valid_rows], cols[valid_cols])]
    patch[np.ix_(valid_rows, valid_cols)] = sub

    positive = frame.depth[frame.depth > 0]
    z_min = float(positive.min()) if positive.size else center[2]
    normalized = np.clip(2.0 * (patch - z_min) / band_mm - 1.0, -1.0, 1.0)
    normalized[patch <= 0] = 1.0
    return normalized.astype(np.float32)


def clamp_offset(offset: np.ndarray, clamp_mm: float) -> np.ndarray:
    """Shrinks an offset vector so its norm does not exceed `clamp_mm`.

    Args:
        offset (np.ndarray): Offset (x, y, z) in mm.
        clamp_mm (float): Maximum norm.

    Returns:
        np.ndarray: The clamped offset.
    """
    offset = np.asarray(offset, dtype=np.float64)
    norm = float(np.linalg.norm(offset))
    if norm > clamp_mm:
        warnings.warn(
            f"Localizer offset of {norm:.1f} mm clamped to {clamp_mm:.1f} mm."
        )
        return offset * (clamp_mm / norm)
    return offset


def refine_reference(
    frame: DepthFrame,
    com: Sequence[float],
    localizer: "LocalizationNet",
    clamp_mm: float = DEFAULT_OFFSET_CLAMP_MM,
    band_mm: float = DEFAULT_BAND_MM,
) -> ReferencePoint:
    """Moves the center of mass by the offset the localizer predicts.

    Args:
        frame (DepthFrame): Segmented frame.
        com (Sequence[float]): Center of mass in mm.
        localizer (LocalizationNet): Trained (or zero-initialized) localizer.
        clamp_mm (float): Maximum offset norm. (default: `150.0`)
        band_mm (float): Depth range of the segmentation band. (default: `400.0`)

    Returns:
        ReferencePoint: The refined point.
    """
    com = np.asarray(com, dtype=np.float64)
    cfg = localizer.config
    patch = crop_depth_patch(frame, com, cfg.half_extent_mm, cfg.input_size, band_mm)
    offset = localizer.predict_offsets(patch[None, None])[0]
    offset = clamp_offset(offset, clamp_mm)
    position = com + offset
    logging.debug(f"Refined reference {com} -> {position}")
    return ReferencePoint(
        position=tuple(float(v) for v in position), source=ReferenceSource.REFINED
    )
