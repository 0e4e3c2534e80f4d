# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

"""Accuracy metrics and their report files.

Report files (schema version 1):

    per_joint_error.csv   joint_index,joint_name,mean_error_mm
    success_curve.csv     threshold_mm,fraction
    loss_history.csv      step,epoch,loss
    report.json           every EvalReport field plus schema_version

Runs with equal seeds and configuration write identical files, except for the
measured `wall_time_per_frame` in report.json.
"""

import csv
import json
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
from pydantic.dataclasses import dataclass

from voxhand.errors import LengthMismatch
from voxhand.ingest.frame import JointSet

SCHEMA_VERSION = 1
PER_JOINT_COLUMNS = ("joint_index", "joint_name", "mean_error_mm")
SUCCESS_CURVE_COLUMNS = ("threshold_mm", "fraction")
LOSS_HISTORY_COLUMNS = ("step", "epoch", "loss")
# Measured, so they differ between otherwise identical runs.
TIMING_FIELDS = ("wall_time_per_frame",)


def joint_errors(preds: Sequence[JointSet], truths: Sequence[JointSet]) -> np.ndarray:
    """Euclidean distance of every joint in every frame.

    Args:
        preds (Sequence[JointSet]): Predictions.
        truths (Sequence[JointSet]): Ground truth, same order.

    Returns:
        np.ndarray: (M, F) distances in mm.

    Raises:
        LengthMismatch: If frame counts or joint counts differ, or both are empty.
    """
    if len(preds) != len(truths):
        raise LengthMismatch(f"{len(preds)} predictions for {len(truths)} frames.")
    if not preds:
        raise LengthMismatch("No frames to compare.")
    counts = {p.num_joints for p in preds} | {t.num_joints for t in truths}
    if len(counts) != 1:
        raise LengthMismatch(
            f"Joint counts differ between frames or sources: {sorted(counts)}."
        )
    pred = np.stack([p.joints for p in preds])
    truth = np.stack([t.joints for t in truths])
    return np.linalg.norm(pred - truth, axis=2)


def mean_joint_error(
    preds: Sequence[JointSet], truths: Sequence[JointSet]
) -> Tuple[np.ndarray, float]:
    """
    Args:
        preds (Sequence[JointSet]): Predictions.
        truths (Sequence[JointSet]): Ground truth.

    Returns:
        Tuple[np.ndarray, float]: Per-joint mean error over frames (F,) and
        their mean, in mm.
    """
    per_joint = joint_errors(preds, truths).mean(axis=0)
    return per_joint, float(per_joint.mean())


def success_fraction_curve(
    preds: Sequence[JointSet],
    truths: Sequence[JointSet],
    thresholds: Sequence[float],
) -> List[Tuple[float, float]]:
    """Fraction of frames whose worst joint error is strictly below each threshold.

    Args:
        preds (Sequence[JointSet]): Predictions.
        truths (Sequence[JointSet]): Ground truth.
        thresholds (Sequence[float]): Positive, ascending thresholds in mm.

    Returns:
        List[Tuple[float, float]]: (threshold, fraction) pairs.

    Raises:
        ValueError: If thresholds are not positive and ascending.
    """
    thresholds = [float(d) for d in thresholds]
    if any(d <= 0 for d in thresholds) or thresholds != sorted(thresholds):
        raise ValueError(
            f"Thresholds must be positive and ascending, got {thresholds}."
        )
    worst = joint_errors(preds, truths).max(axis=1)
    return [(d, float(np.mean(worst < d))) for d in thresholds]


@dataclass(frozen=True)
class EvalReport:
    """Accuracy and speed of a model on a set of frames.

    Args:
        joint_names (List[str]): Name of every joint.
        per_joint_mean_error (List[float]): Mean error per joint in mm.
        overall_mean_error (float): Mean of the per-joint errors.
        success_curve (List[Tuple[float, float]]): (threshold mm, fraction).
        wall_time_per_frame (float): Pipeline plus network time per frame, ms;
            measured, so it varies between otherwise identical runs.
        frames_evaluated (int): Frames in the evaluation set.
    """

    joint_names: List[str]
    per_joint_mean_error: List[float]
    overall_mean_error: float
    success_curve: List[Tuple[float, float]]
    wall_time_per_frame: float
    frames_evaluated: int

    def __post_init__(self) -> None:
        if len(self.joint_names) != len(self.per_joint_mean_error):
            raise ValueError(
                f"{len(self.joint_names)} joint names for "
                f"{len(self.per_joint_mean_error)} joint errors."
            )
        fractions = [f for _, f in self.success_curve]
        if any(not 0.0 <= f <= 1.0 for f in fractions) or any(
            b < a for a, b in zip(fractions, fractions[1:])
        ):
            raise ValueError(f"Success fractions {fractions} are not a valid curve.")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "joint_names": list(self.joint_names),
            "per_joint_mean_error": list(self.per_joint_mean_error),
            "overall_mean_error": self.overall_mean_error,
            "success_curve": [list(point) for point in self.success_curve],
            "wall_time_per_frame": self.wall_time_per_frame,
            "frames_evaluated": self.frames_evaluated,
        }

    def deterministic_dict(self) -> Dict[str, Any]:
        """
        Returns:
            Dict[str, Any]: `to_dict()` without the timing fields.
        """
        report = self.to_dict()
        for field in TIMING_FIELDS:
            report.pop(field)
        return report


def build_report(
    preds: Sequence[JointSet],
    truths: Sequence[JointSet],
    thresholds: Sequence[float],
    joint_names: Sequence[str],
    wall_time_per_frame: float = 0.0,
) -> EvalReport:
    """Computes every metric of an EvalReport.

    Args:
        preds (Sequence[JointSet]): Predictions.
        truths (Sequence[JointSet]): Ground truth.
        thresholds (Sequence[float]): Success-curve thresholds in mm.
        joint_names (Sequence[str]): Joint names in dataset order.
        wall_time_per_frame (float): Measured time per frame in ms.

    Returns:
        EvalReport: The report.
    """
    per_joint, overall = mean_joint_error(preds, truths)
    return EvalReport(
        joint_names=list(joint_names),
        per_joint_mean_error=[float(e) for e in per_joint],
        overall_mean_error=overall,
        success_curve=success_fraction_curve(preds, truths, thresholds),
        wall_time_per_frame=wall_time_per_frame,
        frames_evaluated=len(preds),
    )


def write_per_joint_csv(path: str, report: EvalReport) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(PER_JOINT_COLUMNS)
        for index, (name, error) in enumerate(
            zip(report.joint_names, report.per_joint_mean_error)
        ):
            writer.writerow([index, name, repr(error)])


def write_success_curve_csv(path: str, report: EvalReport) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(SUCCESS_CURVE_COLUMNS)
        for threshold, fraction in report.success_curve:
            writer.writerow([repr(threshold), repr(fraction)])


def write_report_json(path: str, report: EvalReport) -> None:
    with open(path, "w") as f:
        json.dump(report.to_dict(), f, indent=2)


def write_loss_history_csv(
    path: str, history: Sequence[Tuple[int, int, float]]
) -> None:
    """Writes (step, epoch, loss) rows; losses keep full float precision."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(LOSS_HISTORY_COLUMNS)
        for step, epoch, loss in history:
            writer.writerow([step, epoch, repr(float(loss))])
