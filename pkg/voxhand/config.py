# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

"""Run configuration.

A run is configured by the packaged `configs/default.toml`, optionally merged
with a user TOML file and command-line overrides. The merged dictionary is
checked against `CONFIG_JSON_SCHEMA` and then turned into validated dataclasses.
"""

import copy
import logging
import os
from dataclasses import field
from enum import Enum
from typing import Any, Dict, List, Optional

import jsonschema
import numpy as np
import toml
from pydantic.dataclasses import dataclass

import voxhand
from voxhand.errors import ConfigInvalid
from voxhand.ingest.frame import CameraIntrinsics
from voxhand.models.handnet import HandNetConfig
from voxhand.models.localizer import LocalizerConfig

DEFAULT_CONFIG_PATH = f"{os.path.dirname(voxhand.__file__)}/configs/default.toml"

_NUMBER = {"type": "number"}
_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_COUNT = {"type": "integer", "minimum": 0}
_POSITIVE_INT = {"type": "integer", "minimum": 1}
_FLAG = {"type": "boolean"}
_STRINGS = {"type": "array", "items": {"type": "string"}}
_INTS = {"type": "array", "items": {"type": "integer", "minimum": 1}}


def _section(properties: Dict[str, Any]) -> Dict[str, Any]:
    return {
        "type": "object",
        "properties": properties,
        "required": sorted(properties),
        "additionalProperties": False,
    }


CONFIG_JSON_SCHEMA = _section(
    {
        "seed": _COUNT,
        "camera": _section(
            {
                "fp": _POSITIVE,
                "fq": _POSITIVE,
                "cp": _NUMBER,
                "cq": _NUMBER,
                "width": _POSITIVE_INT,
                "height": _POSITIVE_INT,
            }
        ),
        "dataset": _section(
            {
                "root": {"type": "string"},
                "synthetic": _FLAG,
                "subjects": {**_STRINGS, "minItems": 1},
                "joint_sign_y": {"enum": [-1.0, 1.0]},
                "joint_sign_z": {"enum": [-1.0, 1.0]},
                "joint_names": _STRINGS,
                "synthetic_gestures": {**_STRINGS, "minItems": 1},
                "synthetic_frames_per_gesture": _POSITIVE_INT,
            }
        ),
        "pipeline": _section(
            {
                "band_mm": _POSITIVE,
                "half_extent_mm": _POSITIVE,
                "grid_size": _POSITIVE_INT,
                "input_size": _POSITIVE_INT,
                "pitch_mode": {"enum": ["fitted", "fixed"]},
                "fixed_pitch_mm": _POSITIVE,
                "offset_clamp_mm": _POSITIVE,
                "diagnostic_grid_size": _POSITIVE_INT,
            }
        ),
        "handnet": _section(
            {
                "input_size": _POSITIVE_INT,
                "num_joints": _POSITIVE_INT,
                "channels": {**_INTS, "minItems": 5, "maxItems": 5},
                "adaptive_pool_size": _POSITIVE_INT,
                "dropout": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "output_scale_mm": _POSITIVE,
                "bn_momentum": {"type": "number", "minimum": 0, "maximum": 1},
                "bn_eps": _POSITIVE,
            }
        ),
        "localizer": _section(
            {
                "input_size": _POSITIVE_INT,
                "filters": {**_INTS, "minItems": 3, "maxItems": 3},
                "fc_units": _POSITIVE_INT,
                "output_scale_mm": _POSITIVE,
            }
        ),
        "train": _section(
            {
                "lr": _POSITIVE,
                "batch_size": {"type": "integer", "minimum": 2},
                "epochs": _POSITIVE_INT,
                "sigma": _POSITIVE,
                "held_out_subject": {"type": "string"},
                "augment": _FLAG,
                "workers": _POSITIVE_INT,
                "max_steps": _COUNT,
                "max_frames": _COUNT,
                "train_localizer": _FLAG,
                "localizer_steps": _COUNT,
                "bn_recalibration_frames": _COUNT,
            }
        ),
        "eval": _section(
            {"threshold_max_mm": _POSITIVE, "threshold_step_mm": _POSITIVE}
        ),
        "bench": _section(
            {
                "frames": _POSITIVE_INT,
                "warmup": _COUNT,
                "input_size": _POSITIVE_INT,
                "end_to_end": _FLAG,
            }
        ),
    }
)


class PitchMode(str, Enum):
    FITTED = "fitted"
    FIXED = "fixed"


@dataclass(frozen=True)
class CameraConfig:
    fp: float
    fq: float
    cp: float
    cq: float
    width: int = 320
    height: int = 240

    @property
    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(fp=self.fp, fq=self.fq, cp=self.cp, cq=self.cq)


@dataclass(frozen=True)
class DatasetConfig:
    """Where frames come from.

    Args:
        root (str): MSRA-layout dataset root.
        synthetic (bool): Render frames instead of reading `root`.
        subjects (List[str]): Subject ids in dataset order.
        joint_sign_y (float): Joint-file y sign factor.
        joint_sign_z (float): Joint-file z sign factor.
        joint_names (List[str]): Joint names in dataset order.
        synthetic_gestures (List[str]): Gestures of the synthetic dataset.
        synthetic_frames_per_gesture (int): Frames per synthetic gesture.
    """

    root: str = "data/msra"
    synthetic: bool = False
    subjects: List[str] = field(default_factory=lambda: [f"P{i}" for i in range(9)])
    joint_sign_y: float = -1.0
    joint_sign_z: float = -1.0
    joint_names: List[str] = field(default_factory=list)
    synthetic_gestures: List[str] = field(default_factory=lambda: ["1"])
    synthetic_frames_per_gesture: int = 4


@dataclass(frozen=True)
class PipelineConfig:
    """Depth frame to network input.

    Args:
        band_mm (float): Depth band kept behind the closest return.
        half_extent_mm (float): Half edge of the cube cropped around the
            reference point.
        grid_size (int): Edge of the voxelized cube, in voxels.
        input_size (int): Edge of the cropped network input, in voxels.
        pitch_mode (PitchMode): `fitted` spreads the cube over `grid_size`
            voxels, `fixed` uses `fixed_pitch_mm`.
        fixed_pitch_mm (float): Voxel edge in `fixed` mode.
        offset_clamp_mm (float): Maximum localizer offset.
        diagnostic_grid_size (int): Edge of the full-scene diagnostic grid.
    """

    band_mm: float = 400.0
    half_extent_mm: float = 150.0
    grid_size: int = 96
    input_size: int = 88
    pitch_mode: PitchMode = PitchMode.FITTED
    fixed_pitch_mm: float = 10.0
    offset_clamp_mm: float = 150.0
    diagnostic_grid_size: int = 200

    def __post_init__(self) -> None:
        if self.input_size > self.grid_size:
            raise ValueError(
                f"Pipeline input_size {self.input_size} exceeds grid_size "
                f"{self.grid_size}."
            )

    @property
    def pitch_mm(self) -> float:
        if self.pitch_mode == PitchMode.FIXED:
            return self.fixed_pitch_mm
        return 2.0 * self.half_extent_mm / self.grid_size


@dataclass(frozen=True)
class TrainConfig:
    """Training recipe.

    Args:
        lr (float): Adam learning rate. (default: `3e-4`)
        batch_size (int): Frames per step; at least 2 for BatchNorm.
        epochs (int): Passes over the training frames. (default: `3`)
        sigma (float): Standard deviation of initial weights.
        held_out_subject (str): Subject left out of training.
        augment (bool): Apply random scale, translation and rotation.
        workers (int): Threads preparing samples.
        max_steps (int): Stop after this many steps; 0 for no cap.
        max_frames (int): Subsample the training frames; 0 for all.
        train_localizer (bool): Train the localizer before the hand network.
        localizer_steps (int): Localizer optimization steps.
        bn_recalibration_frames (int): Training frames the BatchNorm statistics
            are re-estimated on after the last step; 0 keeps the running
            averages. (default: `256`)
    """

    lr: float = 3e-4
    batch_size: int = 4
    epochs: int = 3
    sigma: float = 0.005
    held_out_subject: str = "P0"
    augment: bool = True
    workers: int = 1
    max_steps: int = 0
    max_frames: int = 0
    train_localizer: bool = True
    localizer_steps: int = 200
    bn_recalibration_frames: int = 256

    def __post_init__(self) -> None:
        if self.batch_size < 2:
            raise ValueError(
                f"batch_size must be at least 2 for BatchNorm, got {self.batch_size}."
            )
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}.")


@dataclass(frozen=True)
class EvalConfig:
    threshold_max_mm: float = 100.0
    threshold_step_mm: float = 2.0

    def thresholds(self) -> List[float]:
        """
        Returns:
            List[float]: step, 2 * step, ..., up to and including the maximum.
        """
        count = int(np.floor(self.threshold_max_mm / self.threshold_step_mm + 1e-9))
        return [self.threshold_step_mm * (i + 1) for i in range(count)]


@dataclass(frozen=True)
class BenchConfig:
    frames: int = 200
    warmup: int = 20
    input_size: int = 88
    end_to_end: bool = True


@dataclass(frozen=True)
class RunConfig:
    """Every setting of one run.

    Args:
        seed (int): The single source of randomness.
        camera (CameraConfig): Camera intrinsics and image size.
        dataset (DatasetConfig): Frame source.
        pipeline (PipelineConfig): Preprocessing.
        handnet (HandNetConfig): Hand network.
        localizer (LocalizerConfig): Localization network.
        train (TrainConfig): Training recipe.
        eval (EvalConfig): Metrics.
        bench (BenchConfig): Benchmark.
    """

    seed: int
    camera: CameraConfig
    dataset: DatasetConfig
    pipeline: PipelineConfig
    handnet: HandNetConfig
    localizer: LocalizerConfig
    train: TrainConfig
    eval: EvalConfig
    bench: BenchConfig

    def __post_init__(self) -> None:
        if self.handnet.input_size != self.pipeline.input_size:
            raise ValueError(
                f"handnet.input_size {self.handnet.input_size} differs from "
                f"pipeline.input_size {self.pipeline.input_size}."
            )
        names = self.dataset.joint_names
        if names and len(names) != self.handnet.num_joints:
            raise ValueError(
                f"{len(names)} joint names for {self.handnet.num_joints} joints."
            )

    def joint_names(self) -> List[str]:
        names = self.dataset.joint_names
        if names:
            return list(names)
        return [f"joint_{i}" for i in range(self.handnet.num_joints)]

    def to_dict(self) -> Dict[str, Any]:
        """
        Returns:
            Dict[str, Any]: The configuration as plain TOML-compatible values.
        """
        config = _as_dict(self)
        # Derived from pipeline.half_extent_mm when loading.
        config["localizer"].pop("half_extent_mm", None)
        return config


def _as_dict(value: Any) -> Any:
    if hasattr(value, "__dataclass_fields__"):
        fields = value.__dataclass_fields__
        return {name: _as_dict(getattr(value, name)) for name in fields}
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (list, tuple)):
        return [_as_dict(v) for v in value]
    return value


def deep_merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively merges `update` into a copy of `base`.

    Args:
        base (Dict[str, Any]): Lower-priority values.
        update (Dict[str, Any]): Higher-priority values.

    Returns:
        Dict[str, Any]: The merged dictionary.
    """
    merged = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _validate_config_dict(config: Dict[str, Any], source: str) -> None:
    try:
        jsonschema.validate(instance=config, schema=CONFIG_JSON_SCHEMA)
    except jsonschema.exceptions.ValidationError as e:
        location = ".".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigInvalid(
            f"Invalid configuration ({source}) at {location}: {e.message}"
        ) from e


def config_from_dict(config: Dict[str, Any], source: str = "<dict>") -> RunConfig:
    """Validates a merged configuration dictionary and builds a RunConfig.

    Args:
        config (Dict[str, Any]): Complete configuration.
        source (str): Description of where the values came from, for errors.

    Returns:
        RunConfig: The validated configuration.

    Raises:
        ConfigInvalid: If the dictionary violates the schema or a value check.
    """
    _validate_config_dict(config, source)
    try:
        return RunConfig(
            seed=config["seed"],
            camera=CameraConfig(**config["camera"]),
            dataset=DatasetConfig(**config["dataset"]),
            pipeline=PipelineConfig(**config["pipeline"]),
            handnet=HandNetConfig(**config["handnet"]),
            localizer=LocalizerConfig(
                **config["localizer"],
                half_extent_mm=config["pipeline"]["half_extent_mm"],
            ),
            train=TrainConfig(**config["train"]),
            eval=EvalConfig(**config["eval"]),
            bench=BenchConfig(**config["bench"]),
        )
    except (ValueError, TypeError) as e:
        raise ConfigInvalid(f"Invalid configuration ({source}): {e}") from e


def load_config(
    path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None
) -> RunConfig:
    """Loads the default configuration, a user file and overrides, in that order.

    Args:
        path (Optional[str]): User TOML file; keys it omits keep their defaults.
        overrides (Optional[Dict[str, Any]]): Highest-priority nested values,
            e.g. `{"train": {"workers": 4}}`.

    Returns:
        RunConfig: The validated configuration.

    Raises:
        ConfigInvalid: If a file cannot be parsed or the result is invalid.
    """
    config = _read_toml(DEFAULT_CONFIG_PATH)
    sources = [DEFAULT_CONFIG_PATH]
    if path is not None:
        if not os.path.isfile(path):
            raise ConfigInvalid(f"Configuration file {path!r} cannot be found.")
        logging.info(f"loading configuration from {path}")
        config = deep_merge(config, _read_toml(path))
        sources.append(path)
    if overrides:
        config = deep_merge(config, overrides)
        sources.append("overrides")
    return config_from_dict(config, " + ".join(sources))


def _read_toml(path: str) -> Dict[str, Any]:
    try:
        with open(path) as f:
            return toml.load(f)
    except toml.TomlDecodeError as e:
        raise ConfigInvalid(f"Cannot parse {path}: {e}") from e


def input_size_overrides(input_size: int) -> Dict[str, Any]:
    """Overrides setting the network input edge consistently."""
    return {
        "pipeline": {"input_size": input_size},
        "handnet": {"input_size": input_size},
    }
