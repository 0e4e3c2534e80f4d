# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

from voxhand.training.benchmark import (
    BenchmarkReport,
    benchmark_end_to_end,
    benchmark_inference,
)
from voxhand.training.metrics import (
    EvalReport,
    mean_joint_error,
    success_fraction_curve,
)
from voxhand.training.splits import loso_folds, loso_split
from voxhand.training.trainer import (
    TrainResult,
    evaluate,
    recalibrate_handnet,
    train,
    train_localizer,
    train_step,
)

__all__ = [
    "BenchmarkReport",
    "EvalReport",
    "TrainResult",
    "benchmark_end_to_end",
    "benchmark_inference",
    "evaluate",
    "loso_folds",
    "loso_split",
    "mean_joint_error",
    "recalibrate_handnet",
    "success_fraction_curve",
    "train",
    "train_localizer",
    "train_step",
]
