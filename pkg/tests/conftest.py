# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

import os
from typing import Any, Callable, Dict, Iterator, Sequence, Tuple

import numpy as np
import pytest
import toml

from voxhand.config import RunConfig, load_config
from voxhand.ingest.dataset import SyntheticDataset
from voxhand.ingest.frame import CameraIntrinsics, DepthFrame, JointSet
from voxhand.ingest.synthetic import synth_frame, write_synthetic_dataset
from voxhand.nn.tensor import Tensor, default_dtype

GradCheck = Callable[..., float]


@pytest.fixture
def intrinsics() -> CameraIntrinsics:
    """Camera of the MSRA hand gesture release.

    Returns:
        CameraIntrinsics: Intrinsics with a centered principal point.
    """
    return CameraIntrinsics(fp=241.42, fq=241.42, cp=160.0, cq=120.0)


@pytest.fixture
def synthetic_pair(intrinsics: CameraIntrinsics) -> Tuple[DepthFrame, JointSet]:
    """A rendered hand frame with its joints.

    Args:
        intrinsics (CameraIntrinsics): Camera fixture.

    Returns:
        Tuple[DepthFrame, JointSet]: Frame and ground truth of seed 0.
    """
    return synth_frame(0, intrinsics)


@pytest.fixture
def small_overrides() -> Dict[str, Any]:
    """Configuration overrides for a run small enough for unit tests.

    Three synthetic subjects with two frames each, a 36^3 grid cropped to 32^3
    and a narrow network.

    Returns:
        Dict[str, Any]: Nested overrides for `load_config`.
    """
    return {
        "dataset": {
            "synthetic": True,
            "subjects": ["P0", "P1", "P2"],
            "synthetic_gestures": ["1"],
            "synthetic_frames_per_gesture": 2,
        },
        "pipeline": {"grid_size": 36, "input_size": 32},
        "handnet": {
            "input_size": 32,
            "channels": [4, 4, 8, 8, 4],
            "adaptive_pool_size": 2,
        },
        "localizer": {"input_size": 32, "filters": [2, 2, 2], "fc_units": 8},
        "train": {
            "batch_size": 2,
            "epochs": 1,
            "max_steps": 2,
            "localizer_steps": 2,
            "bn_recalibration_frames": 4,
            "held_out_subject": "P0",
        },
        "bench": {"frames": 3, "warmup": 1, "input_size": 32, "end_to_end": True},
    }


@pytest.fixture
def small_run(small_overrides: Dict[str, Any]) -> RunConfig:
    """The default configuration with `small_overrides` applied.

    Args:
        small_overrides (Dict[str, Any]): Overrides fixture.

    Returns:
        RunConfig: Validated configuration.
    """
    return load_config(overrides=small_overrides)


@pytest.fixture
def small_dataset(small_run: RunConfig) -> SyntheticDataset:
    """Synthetic frames addressed like the MSRA release.

    Args:
        small_run (RunConfig): Configuration fixture.

    Returns:
        SyntheticDataset: Six frames of three subjects.
    """
    return SyntheticDataset(
        small_run.camera.intrinsics,
        small_run.dataset.subjects,
        small_run.dataset.synthetic_gestures,
        small_run.dataset.synthetic_frames_per_gesture,
        seed=small_run.seed,
    )


@pytest.fixture
def msra_root(tmp_path: Any, small_run: RunConfig) -> str:
    """The small synthetic dataset written to disk in the MSRA layout.

    Args:
        tmp_path (Any): pytest temporary directory.
        small_run (RunConfig): Configuration fixture.

    Returns:
        str: Dataset root directory.
    """
    root = os.path.join(str(tmp_path), "msra")
    write_synthetic_dataset(
        root,
        small_run.camera.intrinsics,
        small_run.dataset.subjects,
        small_run.dataset.synthetic_gestures,
        small_run.dataset.synthetic_frames_per_gesture,
        seed=small_run.seed,
    )
    return root


@pytest.fixture
def small_config_file(tmp_path: Any, small_overrides: Dict[str, Any]) -> str:
    """`small_overrides` written as a user TOML file for the command line.

    Args:
        tmp_path (Any): pytest temporary directory.
        small_overrides (Dict[str, Any]): Overrides fixture.

    Returns:
        str: Path of the TOML file.
    """
    path = os.path.join(str(tmp_path), "small.toml")
    with open(path, "w") as f:
        toml.dump(small_overrides, f)
    return path


@pytest.fixture
def float64() -> Iterator[None]:
    """Runs a test with 64-bit tensors as the default."""
    with default_dtype(np.float64):
        yield


def _gradcheck(
    fn: Callable[..., Tensor], inputs: Sequence[Tensor], h: float = 1e-4, seed: int = 0
) -> float:
    out = fn(*inputs)
    upstream = np.random.default_rng(seed).standard_normal(out.shape)
    for tensor in inputs:
        tensor.zero_grad()
    out.backward(upstream)

    worst = 0.0
    for tensor in inputs:
        analytic = tensor.grad
        numeric = np.zeros_like(tensor.data)
        for index in np.ndindex(*tensor.shape):
            original = tensor.data[index]
            tensor.data[index] = original + h
            plus = float(np.sum(fn(*inputs).data * upstream))
            tensor.data[index] = original - h
            minus = float(np.sum(fn(*inputs).data * upstream))
            tensor.data[index] = original
            numeric[index] = (plus - minus) / (2.0 * h)
        scale = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-12)
        worst = max(worst, float(np.abs(analytic - numeric).max() / scale))
    return worst


@pytest.fixture
def gradcheck(float64: None) -> GradCheck:
    """Central finite-difference gradient check at 64-bit precision.

    The returned callable takes `fn(*inputs) -> Tensor` and the input tensors
    (all with `requires_grad=True`), back-propagates a random upstream gradient
    and returns the largest analytic/numeric difference relative to the
    largest gradient magnitude of each input.

    Args:
        float64 (None): Switches the default dtype to float64.

    Returns:
        GradCheck: The checking function.
    """
    return _gradcheck
