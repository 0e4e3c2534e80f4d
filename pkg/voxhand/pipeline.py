# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

"""Depth frame to network input.

    segment -> center of mass -> refine -> project -> cube crop
    -> augment (training) -> voxelize grid_size^3 -> crop input_size^3

Targets are joint coordinates relative to the center of the cropped grid, the
point the network's outputs are added to.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
from pydantic.dataclasses import dataclass

from voxhand.augment import augment_joints_about, augment_points, sample_params
from voxhand.config import PipelineConfig
from voxhand.geometry import (
    ReferencePoint,
    ReferenceSource,
    center_of_mass,
    clamp_offset,
    crop_cube,
    crop_depth_patch,
    project_frame,
    refine_reference,
    segment_hand,
)
from voxhand.ingest.frame import ArrayConfig, DepthFrame, JointSet
from voxhand.models.localizer import LocalizationNet
from voxhand.voxelize import CropMode, VoxelGrid, crop_grid_at, crop_offsets, voxelize

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True, eq=False, config=ArrayConfig)
class PreparedSample:
    """One network input with its regression target.

    Args:
        grid (VoxelGrid): Cropped occupancy grid.
        reference (ReferencePoint): Point the cube was centered on.
        joints (Optional[JointSet]): Ground truth in mm, augmented like the grid.
        target (Optional[np.ndarray]): (F, 3) joints relative to `grid.center`.
    """

    grid: VoxelGrid
    reference: ReferencePoint
    joints: Optional[JointSet] = None
    target: Optional[np.ndarray] = None

    @property
    def crop_center(self) -> np.ndarray:
        return self.grid.center


def sample_seeds(seed: int) -> Tuple[int, int]:
    """Splits one sample seed into augmentation and crop seeds."""
    augment_seed, crop_seed = np.random.SeedSequence(seed).generate_state(2)
    return int(augment_seed), int(crop_seed)


def locate_hand(
    frame: DepthFrame,
    cfg: PipelineConfig,
    localizer: Optional[LocalizationNet] = None,
) -> Tuple[DepthFrame, ReferencePoint]:
    """Segments the hand and finds the reference point.

    Args:
        frame (DepthFrame): Raw frame.
        cfg (PipelineConfig): Pipeline settings.
        localizer (Optional[LocalizationNet]): Refines the center of mass when
            given.

    Returns:
        Tuple[DepthFrame, ReferencePoint]: Segmented frame and reference point.

    Raises:
        EmptyFrame: If the frame has no depth.
    """
    segmented = segment_hand(frame, cfg.band_mm)
    com = center_of_mass(project_frame(segmented))
    if localizer is not None:
        reference = refine_reference(
            segmented, com, localizer, cfg.offset_clamp_mm, cfg.band_mm
        )
        return segmented, reference
    position = tuple(float(v) for v in com)
    reference = ReferencePoint(
        position=position, source=ReferenceSource.CENTER_OF_MASS
    )
    return segmented, reference


def prepare_sample(
    frame: DepthFrame,
    cfg: PipelineConfig,
    joints: Optional[JointSet] = None,
    localizer: Optional[LocalizationNet] = None,
    augment: bool = False,
    seed: int = 0,
) -> PreparedSample:
    """Turns a depth frame into a network input.

    With `augment` the cube points and joints are scaled, translated and
    rotated about the reference point, and the crop window is placed randomly;
    otherwise the centered window is used.

    Args:
        frame (DepthFrame): Raw frame.
        cfg (PipelineConfig): Pipeline settings.
        joints (Optional[JointSet]): Ground truth, if known.
        localizer (Optional[LocalizationNet]): Reference point refinement.
        augment (bool): Apply random augmentation.
        seed (int): Sample seed; equal seeds give equal samples.

    Returns:
        PreparedSample: The cropped grid and target.
    """
    segmented, reference = locate_hand(frame, cfg, localizer)
    center = np.asarray(reference.position)
    cube = crop_cube(project_frame(segmented), center, cfg.half_extent_mm)
    pitch = cfg.pitch_mm

    augment_seed, crop_seed = sample_seeds(seed)
    if augment:
        params = sample_params(augment_seed)
        cube = augment_points(cube, params, center, pitch)
        if joints is not None:
            joints = augment_joints_about(joints, params, center, pitch)

    grid = voxelize(cube, center, cfg.grid_size, pitch)
    mode = CropMode.RANDOM_OFFSET if augment else CropMode.CENTER
    offsets = crop_offsets(grid, cfg.input_size, mode, crop_seed)
    cropped = crop_grid_at(grid, cfg.input_size, offsets)

    target = None
    if joints is not None:
        target = joints.joints - cropped.center
    return PreparedSample(
        grid=cropped, reference=reference, joints=joints, target=target
    )


def localizer_sample(
    frame: DepthFrame,
    joints: JointSet,
    cfg: PipelineConfig,
    patch_size: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """Builds one localizer training pair.

    The target is the offset from the center of mass to the mean of the
    ground-truth joints, clamped to `offset_clamp_mm` like the offsets the
    localizer applies.

    Args:
        frame (DepthFrame): Raw frame.
        joints (JointSet): Ground truth.
        cfg (PipelineConfig): Pipeline settings.
        patch_size (int): Localizer input edge.

    Returns:
        Tuple[np.ndarray, np.ndarray]: (1, S, S) patch and (3,) offset in mm.
    """
    segmented, reference = locate_hand(frame, cfg)
    com = np.asarray(reference.position)
    patch = crop_depth_patch(
        segmented, com, cfg.half_extent_mm, patch_size, cfg.band_mm
    )
    return patch[None], clamp_offset(joints.center - com, cfg.offset_clamp_mm)


def stack_samples(
    samples: Sequence[PreparedSample],
) -> Tuple[np.ndarray, Optional[np.ndarray], np.ndarray]:
    """Stacks prepared samples into network arrays.

    Returns:
        Tuple: (N, 1, D, D, D) float32 grids, (N, F * 3) targets or None, and
        (N, 3) crop centers.
    """
    grids = np.stack([s.grid.occupancy for s in samples])[:, None].astype(np.float32)
    centers = np.stack([s.crop_center for s in samples])
    if any(s.target is None for s in samples):
        return grids, None, centers
    targets = np.stack([s.target.reshape(-1) for s in samples])
    return grids, targets, centers


def ordered_map(fn: Callable[[T], R], items: Sequence[T], workers: int = 1) -> List[R]:
    """Maps `fn` over `items` on a thread pool, keeping input order.

    Results do not depend on `workers` as long as `fn` is deterministic per
    item.
    """
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))
