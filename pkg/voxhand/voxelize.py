# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

import struct
import warnings
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic.dataclasses import dataclass

from voxhand.errors import TargetTooLarge
from voxhand.geometry import PointCloud
from voxhand.ingest.frame import ArrayConfig

GRID_HEADER_FORMAT = "<3id3d"
DIAGNOSTIC_GRID_SIZE = 200
DIAGNOSTIC_PITCH_MM = 10.0


class CropMode(str, Enum):
    CENTER = "Center"
    RANDOM_OFFSET = "RandomOffset"


@dataclass(frozen=True, eq=False, config=ArrayConfig)
class VoxelGrid:
    """A dense binary occupancy grid.

    Occupancy is indexed `[x, y, z]`; voxel `(i, j, k)` spans
    `origin + (i, j, k) * pitch` to `origin + (i + 1, j + 1, k + 1) * pitch`.

    Args:
        size (Tuple[int, int, int]): Voxels per axis (Gx, Gy, Gz).
        pitch (float): Edge length of one voxel in mm.
        origin (Tuple[float, float, float]): Corner of voxel (0, 0, 0) in mm.
        occupancy (np.ndarray): uint8 array of shape `size` holding 0 or 1.
    """

    size: Tuple[int, int, int]
    pitch: float
    origin: Tuple[float, float, float]
    occupancy: np.ndarray

    def __post_init__(self) -> None:
        if self.pitch <= 0:
            raise ValueError(f"Voxel pitch must be positive, got {self.pitch}.")
        occupancy = np.array(self.occupancy, dtype=np.uint8, copy=True)
        if occupancy.size != int(np.prod(self.size)):
            raise ValueError(
                f"Occupancy holds {occupancy.size} voxels, size {self.size} needs "
                f"{int(np.prod(self.size))}."
            )
        occupancy = occupancy.reshape(tuple(self.size))
        if np.any(occupancy > 1):
            raise ValueError("Occupancy values must be 0 or 1.")
        occupancy.setflags(write=False)
        object.__setattr__(self, "occupancy", occupancy)

    @property
    def center(self) -> np.ndarray:
        """
        Returns:
            np.ndarray: Physical center of the grid in mm.
        """
        return np.asarray(self.origin) + np.asarray(self.size) * self.pitch / 2.0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VoxelGrid):
            return NotImplemented
        return (
            tuple(self.size) == tuple(other.size)
            and self.pitch == other.pitch
            and np.allclose(self.origin, other.origin)
            and np.array_equal(self.occupancy, other.occupancy)
        )


def voxelize(
    cloud: PointCloud, center: Sequence[float], size: int, pitch: float
) -> VoxelGrid:
    """Discretizes a point cloud into a cubic occupancy grid around `center`.

    A point maps to index floor((point - origin) / pitch) with
    origin = center - size * pitch / 2; points whose index falls outside
    [0, size) are discarded.

    Args:
        cloud (PointCloud): Points in mm.
        center (Sequence[float]): Grid center in mm.
        size (int): Voxels per axis.
        pitch (float): Voxel edge length in mm.

    Returns:
        VoxelGrid: The occupancy grid; all zero for an empty cloud.

    Raises:
        ValueError: If `size` < 1 or `pitch` <= 0.
    """
    if size < 1 or pitch <= 0:
        raise ValueError(f"Need size >= 1 and pitch > 0, got {size} and {pitch}.")
    center = np.asarray(center, dtype=np.float64)
    origin = center - size * pitch / 2.0

    # Index relative to the center keeps the grid exact under common translations.
    indices = np.floor((cloud.points - center) / pitch + size / 2.0).astype(np.int64)
    inside = np.all((indices >= 0) & (indices < size), axis=1)
    indices = indices[inside]

    occupancy = np.zeros((size, size, size), dtype=np.uint8)
    occupancy[indices[:, 0], indices[:, 1], indices[:, 2]] = 1
    return VoxelGrid(
        size=(size, size, size),
        pitch=pitch,
        origin=tuple(float(v) for v in origin),
        occupancy=occupancy,
    )


def voxelize_scene(cloud: PointCloud, center: Sequence[float]) -> VoxelGrid:
    """Builds the full-scene diagnostic grid of 200^3 voxels at 10 mm.

    Args:
        cloud (PointCloud): Points in mm.
        center (Sequence[float]): Reference point in mm.

    Returns:
        VoxelGrid: The 2 m diagnostic grid.
    """
    return voxelize(cloud, center, DIAGNOSTIC_GRID_SIZE, DIAGNOSTIC_PITCH_MM)


def crop_offsets(
    grid: VoxelGrid,
    target: int,
    mode: CropMode = CropMode.CENTER,
    seed: Optional[int] = None,
) -> Tuple[int, int, int]:
    """Computes the per-axis start offsets of a crop window.

    Args:
        grid (VoxelGrid): Grid to crop.
        target (int): Voxels per axis of the window.
        mode (CropMode): Centered or seeded uniform random window.
        seed (Optional[int]): Seed for `CropMode.RANDOM_OFFSET`.

    Returns:
        Tuple[int, int, int]: Offsets (ox, oy, oz).

    Raises:
        TargetTooLarge: If `target` exceeds any grid axis.
    """
    if any(target > axis for axis in grid.size) or target < 1:
        raise TargetTooLarge(f"Cannot crop {target}^3 from a {grid.size} grid.")
    slack = [axis - target for axis in grid.size]
    if CropMode(mode) is CropMode.CENTER:
        return tuple(s // 2 for s in slack)
    rng = np.random.default_rng(seed)
    return tuple(int(rng.integers(0, s + 1)) for s in slack)


def crop_grid_at(grid: VoxelGrid, target: int, offsets: Sequence[int]) -> VoxelGrid:
    """Cuts a `target`^3 window starting at `offsets`.

    Args:
        grid (VoxelGrid): Grid to crop.
        target (int): Voxels per axis of the window.
        offsets (Sequence[int]): Start index per axis.

    Returns:
        VoxelGrid: The window, with its origin moved accordingly.
    """
    ox, oy, oz = (int(o) for o in offsets)
    if any(o < 0 or o + target > axis for o, axis in zip((ox, oy, oz), grid.size)):
        raise TargetTooLarge(
            f"Window {target}^3 at {offsets} leaves the {grid.size} grid."
        )
    window = grid.occupancy[ox : ox + target, oy : oy + target, oz : oz + target]
    dropped = int(grid.occupancy.sum()) - int(window.sum())
    if dropped > 0:
        warnings.warn(f"Cropping to {target}^3 discarded {dropped} occupied voxels.")
    origin = np.asarray(grid.origin) + np.array([ox, oy, oz]) * grid.pitch
    return VoxelGrid(
        size=(target, target, target),
        pitch=grid.pitch,
        origin=tuple(float(v) for v in origin),
        occupancy=window,
    )


def crop_grid(
    grid: VoxelGrid,
    target: int,
    mode: CropMode = CropMode.CENTER,
    seed: Optional[int] = None,
) -> VoxelGrid:
    """Crops a grid to `target`^3 voxels.

    `CropMode.CENTER` takes the centered window (96 -> 88 starts at 4);
    `CropMode.RANDOM_OFFSET` draws every axis offset uniformly from the valid
    range using `seed`.

    Args:
        grid (VoxelGrid): Grid to crop.
        target (int): Voxels per axis.
        mode (CropMode): Window placement. (default: `CropMode.CENTER`)
        seed (Optional[int]): Seed for random placement.

    Returns:
        VoxelGrid: The cropped grid.

    Raises:
        TargetTooLarge: If `target` exceeds any grid axis.
    """
    return crop_grid_at(grid, target, crop_offsets(grid, target, mode, seed))


def occupancy_count(grid: VoxelGrid) -> int:
    """
    Args:
        grid (VoxelGrid): Any grid.

    Returns:
        int: Number of occupied voxels.
    """
    return int(np.count_nonzero(grid.occupancy))


def save_grid(path: str, grid: VoxelGrid) -> None:
    """Writes the debugging dump of a grid.

    Layout (little-endian): int32 Gx, Gy, Gz; float64 pitch; float64 origin
    x, y, z; then the occupancy bits with x varying fastest, packed eight per
    byte, least significant bit first.

    Args:
        path (str): Destination file.
        grid (VoxelGrid): Grid to dump.
    """
    header = struct.pack(GRID_HEADER_FORMAT, *grid.size, grid.pitch, *grid.origin)
    bits = np.packbits(grid.occupancy.reshape(-1, order="F"), bitorder="little")
    with open(path, "wb") as f:
        f.write(header)
        f.write(bits.tobytes())


def load_grid(path: str) -> VoxelGrid:
    """Reads a dump written by `save_grid`.

    Args:
        path (str): Dump file.

    Returns:
        VoxelGrid: The grid.
    """
    with open(path, "rb") as f:
        raw = f.read()
    header_bytes = struct.calcsize(GRID_HEADER_FORMAT)
    gx, gy, gz, pitch, ox, oy, oz = struct.unpack_from(GRID_HEADER_FORMAT, raw)
    count = gx * gy * gz
    bits = np.frombuffer(raw[header_bytes:], dtype=np.uint8)
    occupancy = np.unpackbits(bits, count=count, bitorder="little")
    return VoxelGrid(
        size=(gx, gy, gz),
        pitch=pitch,
        origin=(ox, oy, oz),
        occupancy=occupancy.reshape((gx, gy, gz), order="F"),
    )
