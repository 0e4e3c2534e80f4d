# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

"""Typed errors raised across voxhand.

Every error also derives from the builtin that describes the same condition, so
code catching `ValueError` or `RuntimeError` keeps working.
"""

from typing import Optional


class VoxhandError(Exception):
    """Base class of every error raised by voxhand."""


class DataError(VoxhandError):
    """Input data is missing, truncated or inconsistent. CLI exit code 3."""


class ConfigError(VoxhandError):
    """A configuration or call argument is invalid. CLI exit code 2."""


class EngineError(VoxhandError):
    """The tensor engine or a training loop was driven into an invalid state."""


class TruncatedFile(DataError, ValueError):
    """A binary depth file holds fewer or more bytes than its header promises."""


class MalformedHeader(DataError, ValueError):
    """A depth file header describes a bounding box outside its image."""


class CountMismatch(DataError, ValueError):
    """A joint file holds a different number of frames than its first line says."""


class ParseError(DataError, ValueError):
    """A joint file contains a token that is not a real number."""


class EmptyFrame(DataError, ValueError):
    """A depth frame has no positive depth value."""


class EmptyCloud(DataError, ValueError):
    """An operation that needs points received an empty point cloud."""


class DatasetMissing(DataError, FileNotFoundError):
    """The configured dataset root does not exist or holds no frames."""


class UnknownSubject(DataError, KeyError):
    """A subject id is not part of the dataset."""

    def __str__(self) -> str:
        # KeyError quotes its argument; keep the message readable.
        return str(self.args[0]) if self.args else ""


class LengthMismatch(DataError, ValueError):
    """Predictions and ground truth differ in frame or joint count."""


class ConfigInvalid(ConfigError, ValueError):
    """A configuration file or dataclass failed validation."""


class TargetTooLarge(ConfigError, ValueError):
    """A crop target exceeds the size of the grid it crops."""


class ShapeMismatch(EngineError, ValueError):
    """Tensor shapes are incompatible with the requested operation."""


class TapeMissing(EngineError, RuntimeError):
    """Backward was requested on a tensor with no recorded forward pass."""


class DegenerateBatch(EngineError, ValueError):
    """Batch normalization received a single sample in training mode."""


class MissingGradient(EngineError, RuntimeError):
    """An optimizer step found a parameter without a gradient."""


class DivergedLoss(EngineError, RuntimeError):
    """Training produced a non-finite loss.

    Args:
        message (str): Human readable description.
        step (Optional[int]): Global step index at which the loss diverged.
    """

    def __init__(self, message: str, step: Optional[int] = None):
        super().__init__(message)
        self.step = step
