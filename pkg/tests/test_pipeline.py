# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

import threading
import warnings
from typing import Tuple

import numpy as np
import pytest

from voxhand.config import RunConfig
from voxhand.errors import EmptyFrame
from voxhand.geometry import ReferenceSource, center_of_mass, project_frame
from voxhand.ingest.frame import DepthFrame, JointSet
from voxhand.models.localizer import LocalizationNet
from voxhand.pipeline import (
    localizer_sample,
    locate_hand,
    ordered_map,
    prepare_sample,
    stack_samples,
)
from voxhand.voxelize import occupancy_count


def test_prepare_sample_centered(
    small_run: RunConfig, synthetic_pair: Tuple[DepthFrame, JointSet]
) -> None:
    """Tests shapes, the centered crop and the relative target.

    Args:
        small_run (RunConfig): Small configuration.
        synthetic_pair (Tuple[DepthFrame, JointSet]): Rendered frame fixture.
    """
    frame, joints = synthetic_pair
    sample = prepare_sample(frame, small_run.pipeline, joints)
    assert sample.grid.size == (32, 32, 32)
    assert sample.grid.pitch == pytest.approx(300.0 / 36)
    assert occupancy_count(sample.grid) > 0
    assert sample.reference.source == ReferenceSource.CENTER_OF_MASS
    np.testing.assert_allclose(sample.grid.center, sample.reference.position)
    np.testing.assert_allclose(sample.target, joints.joints - sample.grid.center)
    assert sample.joints == joints


def test_prepare_sample_without_joints(
    small_run: RunConfig, synthetic_pair: Tuple[DepthFrame, JointSet]
) -> None:
    """Tests that inference samples carry no target.

    Args:
        small_run (RunConfig): Small configuration.
        synthetic_pair (Tuple[DepthFrame, JointSet]): Rendered frame fixture.
    """
    sample = prepare_sample(synthetic_pair[0], small_run.pipeline)
    assert sample.target is None and sample.joints is None
    grids, targets, centers = stack_samples([sample, sample])
    assert grids.shape == (2, 1, 32, 32, 32) and grids.dtype == np.float32
    assert targets is None
    assert centers.shape == (2, 3)


def test_augmented_samples_are_seeded(
    small_run: RunConfig, synthetic_pair: Tuple[DepthFrame, JointSet]
) -> None:
    """Tests that the sample seed alone decides the augmentation.

    Args:
        small_run (RunConfig): Small configuration.
        synthetic_pair (Tuple[DepthFrame, JointSet]): Rendered frame fixture.
    """
    frame, joints = synthetic_pair
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = prepare_sample(frame, small_run.pipeline, joints, augment=True, seed=5)
        b = prepare_sample(frame, small_run.pipeline, joints, augment=True, seed=5)
        c = prepare_sample(frame, small_run.pipeline, joints, augment=True, seed=6)
    assert a.grid == b.grid
    np.testing.assert_array_equal(a.target, b.target)
    assert a.grid != c.grid or not np.array_equal(a.target, c.target)
    assert a.joints != joints


def test_stack_samples_targets(
    small_run: RunConfig, synthetic_pair: Tuple[DepthFrame, JointSet]
) -> None:
    """Tests flattened targets of a batch.

    Args:
        small_run (RunConfig): Small configuration.
        synthetic_pair (Tuple[DepthFrame, JointSet]): Rendered frame fixture.
    """
    frame, joints = synthetic_pair
    sample = prepare_sample(frame, small_run.pipeline, joints)
    _, targets, _ = stack_samples([sample] * 3)
    assert targets.shape == (3, 63)
    np.testing.assert_array_equal(targets[1], sample.target.reshape(-1))


def test_locate_hand_with_localizer(
    small_run: RunConfig, synthetic_pair: Tuple[DepthFrame, JointSet]
) -> None:
    """Tests that a zero localizer marks the point refined but keeps it.

    Args:
        small_run (RunConfig): Small configuration.
        synthetic_pair (Tuple[DepthFrame, JointSet]): Rendered frame fixture.
    """
    frame, _ = synthetic_pair
    _, plain = locate_hand(frame, small_run.pipeline)
    localizer = LocalizationNet(small_run.localizer)
    _, refined = locate_hand(frame, small_run.pipeline, localizer)
    assert refined.source == ReferenceSource.REFINED
    np.testing.assert_allclose(refined.position, plain.position)


def test_localizer_sample(
    small_run: RunConfig, synthetic_pair: Tuple[DepthFrame, JointSet]
) -> None:
    """Tests the localizer patch and its offset target.

    Args:
        small_run (RunConfig): Small configuration.
        synthetic_pair (Tuple[DepthFrame, JointSet]): Rendered frame fixture.
    """
    frame, joints = synthetic_pair
    patch, offset = localizer_sample(frame, joints, small_run.pipeline, 32)
    assert patch.shape == (1, 32, 32)
    com = center_of_mass(project_frame(frame))
    np.testing.assert_allclose(offset, joints.center - com)


def test_localizer_sample_clamps_target(
    small_run: RunConfig, synthetic_pair: Tuple[DepthFrame, JointSet]
) -> None:
    """Tests that a far-off hand center gives a target at the clamp radius.

    Args:
        small_run (RunConfig): Small configuration.
        synthetic_pair (Tuple[DepthFrame, JointSet]): Rendered frame fixture.
    """
    frame, joints = synthetic_pair
    far = JointSet(joints=joints.joints + np.array([0.0, 0.0, 500.0]))
    with pytest.warns(UserWarning, match="clamped"):
        _, offset = localizer_sample(frame, far, small_run.pipeline, 32)
    clamp = small_run.pipeline.offset_clamp_mm
    assert np.linalg.norm(offset) == pytest.approx(clamp)
    com = center_of_mass(project_frame(frame))
    direction = far.center - com
    np.testing.assert_allclose(offset, direction * clamp / np.linalg.norm(direction))


def test_empty_frame(
    small_run: RunConfig, synthetic_pair: Tuple[DepthFrame, JointSet]
) -> None:
    """Tests that a frame without depth cannot be prepared.

    Args:
        small_run (RunConfig): Small configuration.
        synthetic_pair (Tuple[DepthFrame, JointSet]): Rendered frame fixture.
    """
    frame, _ = synthetic_pair
    empty = frame.with_depth(np.zeros_like(frame.depth))
    with pytest.raises(EmptyFrame):
        prepare_sample(empty, small_run.pipeline)


@pytest.mark.parametrize("workers", [1, 4])
def test_ordered_map_keeps_order(workers: int) -> None:
    """Tests that results come back in input order on any pool size.

    Args:
        workers (int): Threads.
    """
    threads = set()

    def work(x: int) -> int:
        threads.add(threading.get_ident())
        return x * x

    assert ordered_map(work, list(range(50)), workers) == [x * x for x in range(50)]
    if workers == 1:
        assert threads == {threading.get_ident()}
