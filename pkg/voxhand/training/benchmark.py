# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

"""Per-frame inference latency.

`benchmark_inference` times the network alone, from an occupancy tensor to
joint coordinates. `benchmark_end_to_end` adds segmentation, localization and
voxelization of real frames. Both time one frame per call after warm-up runs.
"""

import logging
import os
import platform
import time
from typing import Callable, List, Optional, Sequence

import numpy as np
from pydantic.dataclasses import dataclass

from voxhand.config import PipelineConfig
from voxhand.ingest.frame import DepthFrame
from voxhand.models.handnet import HandNet, forward_handnet
from voxhand.models.localizer import LocalizationNet
from voxhand.nn.layers import Mode
from voxhand.pipeline import prepare_sample, stack_samples

NETWORK = "network"
END_TO_END = "end_to_end"
# Fraction of occupied voxels in generated benchmark grids.
OCCUPANCY = 0.02


@dataclass(frozen=True)
class BenchmarkReport:
    """Latency statistics over timed frames, in ms.

    Args:
        mode (str): `network` or `end_to_end`.
        input_size (int): Grid edge fed to the network.
        frames (int): Timed frames.
        warmup (int): Untimed frames run first.
        mean_ms (float): Mean time per frame.
        p50_ms (float): Median.
        p99_ms (float): 99th percentile.
        std_ms (float): Standard deviation.
        hardware (str): Description of the machine.
    """

    mode: str
    input_size: int
    frames: int
    warmup: int
    mean_ms: float
    p50_ms: float
    p99_ms: float
    std_ms: float
    hardware: str

    def summary(self) -> str:
        return (
            f"{self.mode} {self.input_size}^3: mean {self.mean_ms:.3f} ms, "
            f"p50 {self.p50_ms:.3f} ms, p99 {self.p99_ms:.3f} ms over "
            f"{self.frames} frames ({self.hardware})"
        )


def hardware_string() -> str:
    processor = platform.processor() or platform.machine()
    return (
        f"{processor}, {os.cpu_count()} logical CPUs, {platform.system()} "
        f"{platform.release()}, Python {platform.python_version()}, "
        f"numpy {np.__version__}"
    )


def _time_calls(fn: Callable[[int], None], frames: int, warmup: int) -> List[float]:
    for i in range(warmup):
        fn(i)
    times = []
    for i in range(frames):
        started = time.perf_counter()
        fn(warmup + i)
        times.append((time.perf_counter() - started) * 1000.0)
    return times


def _report(
    mode: str, input_size: int, times: Sequence[float], warmup: int
) -> BenchmarkReport:
    times = np.asarray(times)
    report = BenchmarkReport(
        mode=mode,
        input_size=input_size,
        frames=len(times),
        warmup=warmup,
        mean_ms=float(times.mean()),
        p50_ms=float(np.percentile(times, 50)),
        p99_ms=float(np.percentile(times, 99)),
        std_ms=float(times.std()),
        hardware=hardware_string(),
    )
    logging.info(report.summary())
    return report


def benchmark_inference(
    model: HandNet,
    frames: int = 200,
    input_size: Optional[int] = None,
    warmup: int = 20,
    seed: int = 0,
) -> BenchmarkReport:
    """Times the network forward pass on single random occupancy grids.

    Args:
        model (HandNet): Network; switched to eval mode.
        frames (int): Timed frames. (default: `200`)
        input_size (Optional[int]): Must match the model; defaults to it.
        warmup (int): Untimed frames first. (default: `20`)
        seed (int): Seed of the generated grids.

    Returns:
        BenchmarkReport: Latency statistics.
    """
    size = input_size or model.config.input_size
    if size != model.config.input_size:
        raise ValueError(
            f"Benchmark size {size} differs from the model input "
            f"{model.config.input_size}."
        )
    if frames < 1:
        raise ValueError(f"frames must be positive, got {frames}.")
    rng = np.random.default_rng(seed)
    shape = (min(frames + warmup, 8), 1, 1, size, size, size)
    grids = (rng.random(shape) < OCCUPANCY).astype(np.float32)
    model.eval()

    def run(i: int) -> None:
        forward_handnet(model, grids[i % len(grids)], Mode.Eval)

    return _report(NETWORK, size, _time_calls(run, frames, warmup), warmup)


def benchmark_end_to_end(
    model: HandNet,
    depth_frames: Sequence[DepthFrame],
    cfg: PipelineConfig,
    localizer: Optional[LocalizationNet] = None,
    frames: int = 200,
    warmup: int = 20,
) -> BenchmarkReport:
    """Times segmentation, localization, voxelization and the network per frame.

    Args:
        model (HandNet): Network; switched to eval mode.
        depth_frames (Sequence[DepthFrame]): Frames cycled through.
        cfg (PipelineConfig): Pipeline settings.
        localizer (Optional[LocalizationNet]): Reference point refinement.
        frames (int): Timed frames.
        warmup (int): Untimed frames first.

    Returns:
        BenchmarkReport: Latency statistics.
    """
    if not depth_frames:
        raise ValueError("End-to-end benchmark needs at least one frame.")
    model.eval()

    def run(i: int) -> None:
        frame = depth_frames[i % len(depth_frames)]
        sample = prepare_sample(frame, cfg, localizer=localizer)
        grids, _, centers = stack_samples([sample])
        forward_handnet(model, grids, Mode.Eval, references=centers)

    return _report(END_TO_END, cfg.input_size, _time_calls(run, frames, warmup), warmup)
