# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

"""Training and evaluation loops.

All randomness derives from `RunConfig.seed`: epoch order from (seed, epoch),
per-sample augmentation and crop placement from (seed, epoch, sample index).
Samples are prepared on `train.workers` threads but consumed in order, so a
run is reproducible for any worker count.
"""

import logging
import time
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from pydantic.dataclasses import dataclass

from voxhand.config import RunConfig
from voxhand.errors import DatasetMissing, DivergedLoss
from voxhand.ingest.dataset import HandDataset, SampleRef
from voxhand.ingest.frame import ArrayConfig, JointSet
from voxhand.models.handnet import HandNet, build_handnet, forward_handnet
from voxhand.models.localizer import LocalizationNet, build_localizer
from voxhand.nn.functional import mse_joint_loss
from voxhand.nn.layers import Mode, Module, recalibrate_batch_norm
from voxhand.nn.optim import Adam
from voxhand.nn.tensor import Tensor
from voxhand.pipeline import (
    PreparedSample,
    localizer_sample,
    ordered_map,
    prepare_sample,
    stack_samples,
)
from voxhand.training.metrics import EvalReport, build_report
from voxhand.training.splits import loso_split

# Keep the localizer's and the recalibration's batch draws apart from the hand
# network's epoch order.
LOCALIZER_STREAM = 1
RECALIBRATION_STREAM = 2


@dataclass(frozen=True)
class LossRecord:
    step: int
    epoch: int
    loss: float

    def as_row(self) -> Tuple[int, int, float]:
        return self.step, self.epoch, self.loss


@dataclass(config=ArrayConfig)
class TrainResult:
    """
    Args:
        model (HandNet): Trained hand network, in eval mode.
        localizer (Optional[LocalizationNet]): Localizer used for the reference
            points, if any.
        history (List[LossRecord]): One record per hand network step.
        localizer_history (List[float]): Localizer loss per step.
        train_refs (List[SampleRef]): Frames trained on.
    """

    model: HandNet
    localizer: Optional[LocalizationNet]
    history: List[LossRecord]
    localizer_history: List[float]
    train_refs: List[SampleRef]


def sample_seed(seed: int, epoch: int, index: int) -> int:
    """Seed of one sample's augmentation and crop in one epoch."""
    return int(np.random.SeedSequence([seed, epoch, index]).generate_state(1)[0])


def select_training_refs(dataset: HandDataset, run: RunConfig) -> List[SampleRef]:
    """Frames of every subject except the held-out one, optionally subsampled.

    Args:
        dataset (HandDataset): All frames.
        run (RunConfig): Supplies the held-out subject, `max_frames` and seed.

    Returns:
        List[SampleRef]: Training frames in dataset order.
    """
    train_subjects, _ = loso_split(dataset.subjects, run.train.held_out_subject)
    refs = dataset.samples_for(train_subjects)
    limit = run.train.max_frames
    if limit and len(refs) > limit:
        rng = np.random.default_rng(run.seed)
        keep = np.sort(rng.choice(len(refs), size=limit, replace=False))
        refs = [refs[i] for i in keep]
    return refs


def prepare_samples(
    dataset: HandDataset,
    refs: Sequence[SampleRef],
    indices: Sequence[int],
    run: RunConfig,
    localizer: Optional[LocalizationNet] = None,
    augment: bool = False,
    epoch: int = 0,
) -> List[PreparedSample]:
    """Loads and prepares `refs[i]` for every i in `indices`, in order."""

    def work(index: int) -> PreparedSample:
        frame, joints = dataset.load(refs[index])
        return prepare_sample(
            frame,
            run.pipeline,
            joints,
            localizer,
            augment,
            sample_seed(run.seed, epoch, index),
        )

    return ordered_map(work, list(indices), run.train.workers)


def _check_finite(loss: float, step: Optional[int]) -> None:
    if not np.isfinite(loss):
        raise DivergedLoss(f"Loss became {loss} at step {step}.", step=step)


def train_step(
    model: Module,
    optimizer: Adam,
    inputs: np.ndarray,
    targets: np.ndarray,
    step: Optional[int] = None,
    mode: Mode = Mode.Train,
) -> float:
    """One forward, backward and Adam update.

    Args:
        model (Module): Network to update.
        optimizer (Adam): Optimizer over the network's parameters.
        inputs (np.ndarray): Input batch.
        targets (np.ndarray): Targets in mm, flattened per sample.
        step (Optional[int]): Global step index, reported on divergence.
        mode (Mode): `Mode.Eval` freezes BatchNorm statistics and disables
            dropout while still computing gradients.

    Returns:
        float: Loss before the update.

    Raises:
        DivergedLoss: If the loss is not finite; parameters are not updated.
    """
    model.train(mode == Mode.Train)
    optimizer.zero_grad()
    loss = mse_joint_loss(model(Tensor(inputs)), targets)
    value = loss.item()
    _check_finite(value, step)
    loss.backward()
    optimizer.step()
    return value


def train_localizer(
    run: RunConfig, dataset: HandDataset, refs: Sequence[SampleRef]
) -> Tuple[LocalizationNet, List[float]]:
    """Trains the localizer to predict (mean of joints - center of mass).

    Every step draws a batch of frames without replacement and builds the
    depth patches on the fly.

    Args:
        run (RunConfig): Localizer architecture and training recipe.
        dataset (HandDataset): Frame source.
        refs (Sequence[SampleRef]): Training frames.

    Returns:
        Tuple[LocalizationNet, List[float]]: Model in eval mode and loss per step.
    """
    if not refs:
        raise DatasetMissing("No frames to train the localizer on.")
    cfg = run.train
    model = build_localizer(run.localizer, seed=run.seed, sigma=cfg.sigma)
    optimizer = Adam(model.parameters(), lr=cfg.lr)
    rng = np.random.default_rng([run.seed, LOCALIZER_STREAM])

    def work(ref: SampleRef) -> Tuple[np.ndarray, np.ndarray]:
        frame, joints = dataset.load(ref)
        return localizer_sample(frame, joints, run.pipeline, run.localizer.input_size)

    history = []
    for step in range(cfg.localizer_steps):
        size = min(cfg.batch_size, len(refs))
        batch = rng.choice(len(refs), size=size, replace=False)
        pairs = ordered_map(work, [refs[i] for i in batch], cfg.workers)
        patches = np.stack([patch for patch, _ in pairs]).astype(np.float32)
        offsets = np.stack([offset for _, offset in pairs])
        loss = train_step(model, optimizer, patches, offsets, step)
        history.append(loss)
        logging.info(f"localizer step {step} loss {loss:.4f}")
    model.eval()
    return model, history


def recalibrate_handnet(
    model: HandNet,
    dataset: HandDataset,
    refs: Sequence[SampleRef],
    run: RunConfig,
    localizer: Optional[LocalizationNet] = None,
    cache: Optional[Dict[int, PreparedSample]] = None,
) -> int:
    """Re-estimates the BatchNorm statistics on un-augmented training frames.

    The running averages trail the weights while Adam moves them; the
    recalibrated statistics match the final weights. Each batch holds
    `train.batch_size` distinct frames drawn from a seeded stream, for
    `train.bn_recalibration_frames` frames in total.

    Args:
        model (HandNet): Trained network; left in eval mode.
        dataset (HandDataset): Frame source.
        refs (Sequence[SampleRef]): Training frames.
        run (RunConfig): Pipeline settings and training recipe.
        localizer (Optional[LocalizationNet]): Reference point refinement.
        cache (Optional[Dict[int, PreparedSample]]): Un-augmented samples by
            index into `refs`, filled as samples are prepared.

    Returns:
        int: Batches used.
    """
    cfg = run.train
    cache = {} if cache is None else cache
    size = min(cfg.batch_size, len(refs))
    rng = np.random.default_rng([run.seed, RECALIBRATION_STREAM])

    def batches() -> Iterator[Tensor]:
        for _ in range(cfg.bn_recalibration_frames // size):
            batch = [int(i) for i in rng.choice(len(refs), size=size, replace=False)]
            missing = [i for i in batch if i not in cache]
            fresh = prepare_samples(dataset, refs, missing, run, localizer)
            cache.update(zip(missing, fresh))
            grids, _, _ = stack_samples([cache[i] for i in batch])
            yield Tensor(grids)

    if size < 2:
        return 0
    used = recalibrate_batch_norm(model, batches())
    logging.info(f"Recalibrated BatchNorm statistics on {used} batches")
    return used


def train(
    run: RunConfig,
    dataset: HandDataset,
    refs: Optional[Sequence[SampleRef]] = None,
    localizer: Optional[LocalizationNet] = None,
) -> TrainResult:
    """Trains the hand network with the run's recipe.

    The localizer is trained first unless one is given or
    `train.train_localizer` is off. Epochs visit the frames in a seeded random
    order and drop the last partial batch. Afterwards the BatchNorm statistics
    are re-estimated with `recalibrate_handnet`.

    Args:
        run (RunConfig): Configuration.
        dataset (HandDataset): Frame source.
        refs (Optional[Sequence[SampleRef]]): Training frames; by default every
            frame outside the held-out subject.
        localizer (Optional[LocalizationNet]): Pretrained localizer.

    Returns:
        TrainResult: Model, localizer and loss histories.

    Raises:
        DatasetMissing: If there are fewer frames than one batch.
        DivergedLoss: If a loss is not finite.
    """
    cfg = run.train
    refs = list(refs) if refs is not None else select_training_refs(dataset, run)
    if len(refs) < cfg.batch_size:
        raise DatasetMissing(
            f"{len(refs)} training frames cannot fill a batch of {cfg.batch_size}."
        )
    logging.info(f"Training on {len(refs)} frames")

    localizer_history: List[float] = []
    if localizer is None and cfg.train_localizer and cfg.localizer_steps > 0:
        localizer, localizer_history = train_localizer(run, dataset, refs)

    model = build_handnet(run.handnet, seed=run.seed, sigma=cfg.sigma)
    optimizer = Adam(model.parameters(), lr=cfg.lr)
    # Without augmentation a sample never changes; prepare it once.
    cache: Dict[int, PreparedSample] = {}

    history: List[LossRecord] = []
    step = 0
    for epoch in range(cfg.epochs):
        order = np.random.default_rng([run.seed, epoch]).permutation(len(refs))
        epoch_losses = []
        for start in range(0, len(order) - cfg.batch_size + 1, cfg.batch_size):
            batch = [int(i) for i in order[start : start + cfg.batch_size]]
            if cfg.augment:
                samples = prepare_samples(
                    dataset, refs, batch, run, localizer, True, epoch
                )
            else:
                missing = [i for i in batch if i not in cache]
                fresh = prepare_samples(dataset, refs, missing, run, localizer)
                cache.update(zip(missing, fresh))
                samples = [cache[i] for i in batch]
            grids, targets, _ = stack_samples(samples)

            loss = train_step(model, optimizer, grids, targets, step)
            history.append(LossRecord(step=step, epoch=epoch, loss=loss))
            epoch_losses.append(loss)
            logging.info(f"step {step} epoch {epoch} loss {loss:.4f}")
            step += 1
            if cfg.max_steps and step >= cfg.max_steps:
                break
        logging.info(f"epoch {epoch} mean loss {np.mean(epoch_losses):.4f}")
        if cfg.max_steps and step >= cfg.max_steps:
            break

    if cfg.bn_recalibration_frames:
        recalibrate_handnet(model, dataset, refs, run, localizer, cache)
    model.eval()
    return TrainResult(
        model=model,
        localizer=localizer,
        history=history,
        localizer_history=localizer_history,
        train_refs=refs,
    )


def evaluate(
    model: HandNet,
    dataset: HandDataset,
    refs: Sequence[SampleRef],
    run: RunConfig,
    localizer: Optional[LocalizationNet] = None,
    oracle: bool = False,
) -> Tuple[EvalReport, List[JointSet], List[JointSet]]:
    """Predicts every frame and scores the predictions.

    Args:
        model (HandNet): Network, run in eval mode.
        dataset (HandDataset): Frame source.
        refs (Sequence[SampleRef]): Frames to evaluate.
        run (RunConfig): Pipeline and metric settings.
        localizer (Optional[LocalizationNet]): Reference point refinement.
        oracle (bool): Replace predictions by the ground truth, to check report
            plumbing.

    Returns:
        Tuple[EvalReport, List[JointSet], List[JointSet]]: Report, predictions
        and ground truth.
    """
    if not refs:
        raise DatasetMissing("No frames to evaluate.")
    preds: List[JointSet] = []
    truths: List[JointSet] = []
    batch_size = run.train.batch_size
    started = time.perf_counter()
    for start in range(0, len(refs), batch_size):
        indices = range(start, min(start + batch_size, len(refs)))
        samples = prepare_samples(dataset, refs, indices, run, localizer)
        grids, _, centers = stack_samples(samples)
        batch_truths = [s.joints for s in samples]
        truths.extend(batch_truths)
        if oracle:
            preds.extend(batch_truths)
        else:
            preds.extend(forward_handnet(model, grids, Mode.Eval, references=centers))
    elapsed_ms = (time.perf_counter() - started) * 1000.0

    report = build_report(
        preds,
        truths,
        run.eval.thresholds(),
        run.joint_names(),
        wall_time_per_frame=elapsed_ms / len(refs),
    )
    logging.info(
        f"Evaluated {len(refs)} frames: mean joint error "
        f"{report.overall_mean_error:.2f} mm"
    )
    return report, preds, truths


def run_loso(
    run: RunConfig, dataset: HandDataset
) -> List[Tuple[str, EvalReport]]:
    """Trains and evaluates one model per held-out subject.

    Returns:
        List[Tuple[str, EvalReport]]: Held-out subject and its report.
    """
    reports = []
    for subject in dataset.subjects:
        train_subjects, test_subjects = loso_split(dataset.subjects, subject)
        logging.info(f"LOSO fold: testing on {subject}")
        result = train(run, dataset, dataset.samples_for(train_subjects))
        report, _, _ = evaluate(
            result.model,
            dataset,
            dataset.samples_for(test_subjects),
            run,
            result.localizer,
        )
        reports.append((subject, report))
    return reports
