# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

from typing import Any, Dict

import numpy as np
import pytest

from voxhand.config import RunConfig, deep_merge, load_config
from voxhand.errors import DatasetMissing, DivergedLoss
from voxhand.geometry import (
    center_of_mass,
    project_frame,
    refine_reference,
    segment_hand,
)
from voxhand.ingest.dataset import SyntheticDataset
from voxhand.models.handnet import build_handnet
from voxhand.nn.layers import Mode
from voxhand.nn.optim import Adam
from voxhand.pipeline import stack_samples
from voxhand.training.trainer import (
    evaluate,
    prepare_samples,
    recalibrate_handnet,
    sample_seed,
    select_training_refs,
    train,
    train_localizer,
    train_step,
)


def _losses(run: RunConfig, dataset: SyntheticDataset) -> list:
    result = train(run, dataset)
    return [record.loss for record in result.history] + result.localizer_history


def test_train_small_run(small_run: RunConfig, small_dataset: SyntheticDataset) -> None:
    """Tests step counts, finite losses and the training frame selection.

    Args:
        small_run (RunConfig): Small configuration.
        small_dataset (SyntheticDataset): Six synthetic frames.
    """
    result = train(small_run, small_dataset)
    assert [r.step for r in result.history] == [0, 1]
    assert all(np.isfinite(r.loss) for r in result.history)
    assert len(result.localizer_history) == 2
    assert result.localizer is not None
    assert {ref.subject_id for ref in result.train_refs} == {"P1", "P2"}
    assert not result.model.training
    assert result.history[0].as_row() == (0, 0, result.history[0].loss)


def test_training_is_reproducible(
    small_overrides: Dict[str, Any], small_dataset: SyntheticDataset
) -> None:
    """Tests that a seed fixes the losses for any worker count.

    Args:
        small_overrides (Dict[str, Any]): Small configuration overrides.
        small_dataset (SyntheticDataset): Six synthetic frames.
    """
    single = load_config(overrides=small_overrides)
    threaded = load_config(
        overrides=deep_merge(small_overrides, {"train": {"workers": 3}})
    )
    assert _losses(single, small_dataset) == _losses(single, small_dataset)
    assert _losses(single, small_dataset) == _losses(threaded, small_dataset)


def test_seed_changes_losses(
    small_overrides: Dict[str, Any], small_dataset: SyntheticDataset
) -> None:
    """Tests that another seed gives another run.

    Args:
        small_overrides (Dict[str, Any]): Small configuration overrides.
        small_dataset (SyntheticDataset): Six synthetic frames.
    """
    base = load_config(overrides=small_overrides)
    other = load_config(overrides=deep_merge(small_overrides, {"seed": 1}))
    assert _losses(base, small_dataset) != _losses(other, small_dataset)


def test_too_few_frames(small_run: RunConfig, small_dataset: SyntheticDataset) -> None:
    """Tests that a batch cannot be built from a single frame.

    Args:
        small_run (RunConfig): Small configuration.
        small_dataset (SyntheticDataset): Six synthetic frames.
    """
    with pytest.raises(DatasetMissing):
        train(small_run, small_dataset, refs=small_dataset.samples()[:1])


def test_select_training_refs_subsamples(
    small_overrides: Dict[str, Any], small_dataset: SyntheticDataset
) -> None:
    """Tests the `max_frames` cap.

    Args:
        small_overrides (Dict[str, Any]): Small configuration overrides.
        small_dataset (SyntheticDataset): Six synthetic frames.
    """
    capped = deep_merge(small_overrides, {"train": {"max_frames": 3}})
    run = load_config(overrides=capped)
    refs = select_training_refs(small_dataset, run)
    assert len(refs) == 3
    assert all(ref.subject_id != "P0" for ref in refs)
    assert refs == select_training_refs(small_dataset, run)


def test_sample_seed_streams() -> None:
    """Tests that seeds differ across epochs and samples."""
    seeds = {sample_seed(0, epoch, index) for epoch in range(3) for index in range(5)}
    assert len(seeds) == 15
    assert sample_seed(0, 1, 2) == sample_seed(0, 1, 2)


def test_oracle_evaluation(
    small_run: RunConfig, small_dataset: SyntheticDataset
) -> None:
    """Tests report plumbing with the ground truth as predictions.

    Args:
        small_run (RunConfig): Small configuration.
        small_dataset (SyntheticDataset): Six synthetic frames.
    """
    model = build_handnet(small_run.handnet)
    refs = small_dataset.samples_for(["P0"])
    report, preds, truths = evaluate(model, small_dataset, refs, small_run, oracle=True)
    assert report.frames_evaluated == 2
    assert report.overall_mean_error == 0.0
    assert all(fraction == 1.0 for _, fraction in report.success_curve)
    assert report.joint_names == small_run.joint_names()
    assert preds == truths


def test_evaluate_predictions(
    small_run: RunConfig, small_dataset: SyntheticDataset
) -> None:
    """Tests that real predictions give finite errors on every frame.

    Args:
        small_run (RunConfig): Small configuration.
        small_dataset (SyntheticDataset): Six synthetic frames.
    """
    model = build_handnet(small_run.handnet)
    refs = small_dataset.samples()[:3]
    report, preds, _ = evaluate(model, small_dataset, refs, small_run)
    assert len(preds) == 3
    assert np.isfinite(report.overall_mean_error)
    assert report.wall_time_per_frame > 0.0


def test_descent_with_frozen_statistics(
    float64: None, small_run: RunConfig, small_dataset: SyntheticDataset
) -> None:
    """Tests that tiny steps on a fixed batch decrease the loss.

    Args:
        float64 (None): 64-bit default dtype.
        small_run (RunConfig): Small configuration.
        small_dataset (SyntheticDataset): Six synthetic frames.
    """
    model = build_handnet(small_run.handnet, seed=0, sigma=0.05)
    optimizer = Adam(model.parameters(), lr=1e-6)
    samples = prepare_samples(small_dataset, small_dataset.samples(), [0, 1], small_run)
    grids, targets, _ = stack_samples(samples)

    losses = [
        train_step(model, optimizer, grids, targets, step, Mode.Eval)
        for step in range(10)
    ]
    increases = sum(b > a for a, b in zip(losses, losses[1:]))
    assert increases <= 1
    assert losses[-1] < losses[0]


def test_diverged_loss_leaves_parameters(
    small_run: RunConfig, small_dataset: SyntheticDataset
) -> None:
    """Tests that a non-finite loss stops before the update.

    Args:
        small_run (RunConfig): Small configuration.
        small_dataset (SyntheticDataset): Six synthetic frames.
    """
    model = build_handnet(small_run.handnet)
    optimizer = Adam(model.parameters())
    samples = prepare_samples(small_dataset, small_dataset.samples(), [0, 1], small_run)
    grids, targets, _ = stack_samples(samples)
    before = [p.data.copy() for p in model.parameters()]
    with pytest.raises(DivergedLoss) as info:
        train_step(model, optimizer, grids, targets * np.inf, step=7)
    assert info.value.step == 7
    for old, p in zip(before, model.parameters()):
        np.testing.assert_array_equal(old, p.data)


def test_recalibration_is_idempotent(
    small_run: RunConfig, small_dataset: SyntheticDataset
) -> None:
    """Tests that recalibrating a trained network again keeps its statistics.

    Args:
        small_run (RunConfig): Small configuration.
        small_dataset (SyntheticDataset): Six synthetic frames.
    """
    result = train(small_run, small_dataset)
    buffers = {name: b.copy() for name, b in result.model.named_buffers()}
    used = recalibrate_handnet(
        result.model, small_dataset, result.train_refs, small_run, result.localizer
    )
    assert used == small_run.train.bn_recalibration_frames // 2
    assert not result.model.training
    for name, buffer in result.model.named_buffers():
        np.testing.assert_array_equal(buffer, buffers[name])


def test_recalibration_off_keeps_running_averages(
    small_overrides: Dict[str, Any], small_dataset: SyntheticDataset
) -> None:
    """Tests that `bn_recalibration_frames = 0` leaves the training buffers.

    Args:
        small_overrides (Dict[str, Any]): Small configuration overrides.
        small_dataset (SyntheticDataset): Six synthetic frames.
    """
    off = deep_merge(small_overrides, {"train": {"bn_recalibration_frames": 0}})
    plain = train(load_config(overrides=off), small_dataset)
    recalibrated = train(load_config(overrides=small_overrides), small_dataset)
    assert [r.loss for r in plain.history] == [r.loss for r in recalibrated.history]
    plain_buffers = dict(plain.model.named_buffers())
    assert any(
        not np.array_equal(buffer, plain_buffers[name])
        for name, buffer in recalibrated.model.named_buffers()
    )


def test_localizer_training_is_reproducible(
    small_overrides: Dict[str, Any],
    small_run: RunConfig,
    small_dataset: SyntheticDataset,
) -> None:
    """Tests that one seed gives equal localizer losses and weights.

    Args:
        small_overrides (Dict[str, Any]): Small configuration overrides.
        small_run (RunConfig): Small configuration.
        small_dataset (SyntheticDataset): Six synthetic frames.
    """
    refs = small_dataset.samples()
    first, first_history = train_localizer(small_run, small_dataset, refs)
    second, second_history = train_localizer(small_run, small_dataset, refs)
    assert len(first_history) == small_run.train.localizer_steps
    assert all(np.isfinite(loss) for loss in first_history)
    assert first_history == second_history
    for a, b in zip(first.parameters(), second.parameters()):
        np.testing.assert_array_equal(a.data, b.data)
    assert not first.training

    reseeded = load_config(overrides=deep_merge(small_overrides, {"seed": 1}))
    _, other_history = train_localizer(reseeded, small_dataset, refs)
    assert other_history != first_history


def test_localizer_without_frames(
    small_run: RunConfig, small_dataset: SyntheticDataset
) -> None:
    """Tests that the localizer needs at least one frame.

    Args:
        small_run (RunConfig): Small configuration.
        small_dataset (SyntheticDataset): Six synthetic frames.
    """
    with pytest.raises(DatasetMissing):
        train_localizer(small_run, small_dataset, [])


@pytest.mark.slow
def test_localizer_fits_one_frame(
    small_overrides: Dict[str, Any], small_dataset: SyntheticDataset
) -> None:
    """Tests that the default localizer fits one frame's offset within 500 steps.

    The refined reference point then lies within 5 mm of the joint mean.

    Args:
        small_overrides (Dict[str, Any]): Small configuration overrides.
        small_dataset (SyntheticDataset): Six synthetic frames.
    """
    overrides = deep_merge(
        small_overrides, {"train": {"batch_size": 4, "localizer_steps": 500}}
    )
    overrides["localizer"] = {}
    run = load_config(overrides=overrides)
    assert run.localizer.input_size == 96
    ref = small_dataset.samples()[2]
    localizer, history = train_localizer(run, small_dataset, [ref] * 4)
    assert min(history) < 1.0

    frame, joints = small_dataset.load(ref)
    segmented = segment_hand(frame, run.pipeline.band_mm)
    com = center_of_mass(project_frame(segmented))
    reference = refine_reference(
        segmented, com, localizer, run.pipeline.offset_clamp_mm, run.pipeline.band_mm
    )
    assert np.linalg.norm(np.asarray(reference.position) - joints.center) < 5.0


@pytest.mark.slow
def test_overfits_small_set(small_overrides: Dict[str, Any]) -> None:
    """Tests the reference overfit: eight frames at 44^3, lr 3e-4, 300 steps.

    The loss must fall below 1% of its first value and the mean joint error on
    the same frames below 10 mm.

    Args:
        small_overrides (Dict[str, Any]): Small configuration overrides.
    """
    overrides = deep_merge(
        small_overrides,
        {
            "pipeline": {"grid_size": 48, "input_size": 44},
            "handnet": {
                "input_size": 44,
                "channels": [8, 8, 16, 16, 8],
                "dropout": 0.0,
            },
            "train": {
                "batch_size": 4,
                "epochs": 150,
                "max_steps": 300,
                "augment": False,
                "train_localizer": False,
                "bn_recalibration_frames": 64,
            },
        },
    )
    with pytest.warns(UserWarning, match="not divisible by 8"):
        run = load_config(overrides=overrides)
    assert run.train.lr == 3e-4
    dataset = SyntheticDataset(run.camera.intrinsics, ["P0", "P1"], ["1"], 4)
    refs = dataset.samples()
    result = train(run, dataset, refs=refs)
    losses = [r.loss for r in result.history]
    assert len(losses) == 300
    assert min(losses) < 0.01 * losses[0]

    report, _, _ = evaluate(result.model, dataset, refs, run)
    assert report.overall_mean_error < 10.0
