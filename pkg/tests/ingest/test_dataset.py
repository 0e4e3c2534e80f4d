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

from voxhand.config import RunConfig
from voxhand.errors import DatasetMissing, UnknownSubject
from voxhand.ingest.dataset import MsraDataset, SyntheticDataset


def test_msra_dataset_missing_root(tmp_path: Any, small_run: RunConfig) -> None:
    """Tests that a missing root fails early.

    Args:
        tmp_path (Any): pytest temporary directory.
        small_run (RunConfig): Configuration fixture.
    """
    with pytest.raises(DatasetMissing):
        MsraDataset(os.path.join(str(tmp_path), "nowhere"), small_run.camera.intrinsics)


def test_msra_dataset_matches_synthetic(
    msra_root: str, small_run: RunConfig, small_dataset: SyntheticDataset
) -> None:
    """Tests that the on-disk dataset reads back what the generator renders.

    Args:
        msra_root (str): Dataset root fixture.
        small_run (RunConfig): Configuration fixture.
        small_dataset (SyntheticDataset): Generated dataset fixture.
    """
    dataset = MsraDataset(msra_root, small_run.camera.intrinsics)
    assert dataset.subjects == ["P0", "P1", "P2"]
    assert len(dataset) == len(small_dataset) == 6

    for on_disk, generated in zip(dataset.samples(), small_dataset.samples()):
        frame_a, joints_a = dataset.load(on_disk)
        frame_b, joints_b = small_dataset.load(generated)
        np.testing.assert_array_equal(frame_a.depth, frame_b.depth)
        np.testing.assert_allclose(joints_a.joints, joints_b.joints, atol=1e-9)
        assert frame_a.subject_id == on_disk.subject_id


def test_samples_for(small_dataset: SyntheticDataset) -> None:
    """Tests subject filtering.

    Args:
        small_dataset (SyntheticDataset): Generated dataset fixture.
    """
    refs = small_dataset.samples_for(["P1"])
    assert len(refs) == 2
    assert {ref.subject_id for ref in refs} == {"P1"}
    with pytest.raises(UnknownSubject):
        small_dataset.samples_for(["P9"])
