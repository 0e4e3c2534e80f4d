# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

"""Command-line interface.

    voxhand prep      write a synthetic dataset in the MSRA layout
    voxhand voxelize  run the pipeline on one depth file and dump the grid
    voxhand train     train the localizer and the hand network
    voxhand eval      score a checkpoint on the held-out subject
    voxhand bench     time the network (and the whole pipeline)
    voxhand predict   print the joints of one depth file as JSON

Exit codes: 0 success; 2 usage or configuration error, unreadable input file
or missing dataset; 3 unusable data such as an empty frame; 4 anything else.
Every command writes one JSON run manifest under `<out-dir>/manifests/`.
"""

import argparse
import dataclasses
import datetime
import json
import logging
import os
import sys
import warnings
from typing import Any, Dict, List, Optional, Tuple

import toml
from pydantic.dataclasses import dataclass

import voxhand
from voxhand.config import RunConfig, deep_merge, input_size_overrides, load_config
from voxhand.errors import (
    ConfigError,
    ConfigInvalid,
    CountMismatch,
    DataError,
    DatasetMissing,
    MalformedHeader,
    ParseError,
    TruncatedFile,
    UnknownSubject,
)
from voxhand.geometry import project_frame, segment_hand
from voxhand.ingest.dataset import HandDataset, MsraDataset, SyntheticDataset
from voxhand.ingest.frame import DepthFrame
from voxhand.ingest.msra import load_msra_frame
from voxhand.ingest.synthetic import write_synthetic_dataset
from voxhand.models.handnet import HandNet, forward_handnet
from voxhand.models.localizer import LocalizationNet
from voxhand.nn.checkpoint import load_checkpoint, load_manifest, save_checkpoint
from voxhand.nn.layers import Mode
from voxhand.pipeline import prepare_sample, stack_samples
from voxhand.training.benchmark import benchmark_end_to_end, benchmark_inference
from voxhand.training.metrics import (
    write_loss_history_csv,
    write_per_joint_csv,
    write_report_json,
    write_success_curve_csv,
)
from voxhand.training.splits import loso_split
from voxhand.training.trainer import evaluate, train
from voxhand.voxelize import DIAGNOSTIC_PITCH_MM, occupancy_count, save_grid, voxelize

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4

USAGE_ERRORS = (
    ConfigError,
    DatasetMissing,
    UnknownSubject,
    TruncatedFile,
    MalformedHeader,
    ParseError,
    CountMismatch,
)

HANDNET_CHECKPOINT = "handnet.ckpt"
LOCALIZER_CHECKPOINT = "localizer.ckpt"


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


@dataclass
class RunManifest:
    """Record of one command invocation.

    Args:
        command (str): Subcommand name.
        argv (List[str]): Arguments as given.
        config (Dict[str, Any]): The resolved configuration.
        seed (int): Seed of the run.
        code_version (str): voxhand version.
        started_at (str): ISO timestamp.
        finished_at (str): ISO timestamp.
        outputs (Dict[str, str]): Output files by role.
        exit_code (int): Process exit code.
    """

    command: str
    argv: List[str]
    config: Dict[str, Any] = dataclasses.field(default_factory=dict)
    seed: int = 0
    code_version: str = voxhand.__version__
    started_at: str = dataclasses.field(default_factory=_now)
    finished_at: str = ""
    outputs: Dict[str, str] = dataclasses.field(default_factory=dict)
    exit_code: int = EXIT_OK

    def write(self, out_dir: str) -> str:
        """Writes the manifest to a new file; existing manifests are never touched.

        Args:
            out_dir (str): Run output directory.

        Returns:
            str: Path of the manifest file.
        """
        directory = os.path.join(out_dir, "manifests")
        os.makedirs(directory, exist_ok=True)
        stamp = self.started_at.replace(":", "").replace("+", "_")
        attempt = 0
        while True:
            suffix = f"-{attempt}" if attempt else ""
            path = os.path.join(directory, f"{stamp}-{self.command}{suffix}.json")
            try:
                with open(path, "x") as f:
                    json.dump(dataclasses.asdict(self), f, indent=2, sort_keys=True)
                return path
            except FileExistsError:
                attempt += 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file merged over the defaults")
    common.add_argument("--seed", type=int, help="seed of every random choice")
    common.add_argument(
        "--subject-holdout", help="subject left out of training and used for eval"
    )
    common.add_argument(
        "--synthetic", action="store_true", help="render frames instead of reading"
    )
    common.add_argument("--workers", type=int, help="sample preparation threads")
    common.add_argument(
        "--frames",
        type=int,
        help="frames to process: timed frames (bench), training frame cap (train), "
        "evaluated frames (eval), frames per gesture (prep)",
    )
    common.add_argument("--input-size", type=int, help="network input edge in voxels")
    common.add_argument("--out-dir", default="runs", help="output directory")
    common.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
    )

    parser = argparse.ArgumentParser(
        prog="voxhand", description="Voxel-based 3D hand pose estimation."
    )
    commands = parser.add_subparsers(dest="command", required=True)

    prep = commands.add_parser(
        "prep", parents=[common], help="write a synthetic dataset"
    )
    prep.set_defaults(handler=cmd_prep)

    vox = commands.add_parser("voxelize", parents=[common], help="voxelize one frame")
    vox.add_argument("frame", help="binary depth file")
    vox.add_argument(
        "--diagnostic", action="store_true", help="also dump the full-scene grid"
    )
    vox.set_defaults(handler=cmd_voxelize)

    train_cmd = commands.add_parser("train", parents=[common], help="train the models")
    train_cmd.add_argument("--max-steps", type=int, help="stop after this many steps")
    train_cmd.add_argument("--epochs", type=int, help="training epochs")
    train_cmd.set_defaults(handler=cmd_train)

    eval_cmd = commands.add_parser(
        "eval", parents=[common], help="evaluate a checkpoint"
    )
    eval_cmd.add_argument("--checkpoint", help="hand network checkpoint")
    eval_cmd.add_argument(
        "--oracle",
        action="store_true",
        help="use ground truth as predictions, to check the report files",
    )
    eval_cmd.set_defaults(handler=cmd_eval)

    bench = commands.add_parser("bench", parents=[common], help="time inference")
    bench.add_argument("--checkpoint", help="hand network checkpoint")
    bench.set_defaults(handler=cmd_bench)

    predict = commands.add_parser("predict", parents=[common], help="predict one frame")
    predict.add_argument("frame", help="binary depth file")
    predict.add_argument("--checkpoint", required=True, help="hand network checkpoint")
    predict.set_defaults(handler=cmd_predict)
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}

    def put(section: str, key: str, value: Any) -> None:
        if value is not None:
            overrides.setdefault(section, {})[key] = value

    if args.seed is not None:
        overrides["seed"] = args.seed
    put("train", "held_out_subject", args.subject_holdout)
    put("train", "workers", args.workers)
    if args.synthetic:
        put("dataset", "synthetic", True)
    if args.input_size is not None:
        for section, values in input_size_overrides(args.input_size).items():
            overrides.setdefault(section, {}).update(values)
        put("bench", "input_size", args.input_size)
    frames = args.frames
    if args.command == "bench":
        put("bench", "frames", frames)
    elif args.command == "train":
        put("train", "max_frames", frames)
        put("train", "max_steps", args.max_steps)
        put("train", "epochs", args.epochs)
    elif args.command == "prep":
        put("dataset", "synthetic_frames_per_gesture", frames)
    return overrides


def _resolve(
    args: argparse.Namespace,
    checkpoint: Optional[str] = None,
    extra: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """Default config, then --config, the checkpoint's architecture, then flags."""
    overrides: Dict[str, Any] = {}
    if checkpoint is not None:
        manifest = load_manifest(checkpoint) or {}
        saved = manifest.get("config", {})
        for section in ("handnet", "localizer", "pipeline"):
            if section in saved:
                overrides[section] = saved[section]
    overrides = deep_merge(overrides, _overrides(args))
    return load_config(args.config, deep_merge(overrides, extra or {}))


def _synthetic_dataset(run: RunConfig) -> SyntheticDataset:
    return SyntheticDataset(
        run.camera.intrinsics,
        run.dataset.subjects,
        run.dataset.synthetic_gestures,
        run.dataset.synthetic_frames_per_gesture,
        seed=run.seed,
    )


def _dataset(run: RunConfig) -> HandDataset:
    if run.dataset.synthetic:
        return _synthetic_dataset(run)
    return MsraDataset(
        run.dataset.root,
        run.camera.intrinsics,
        run.dataset.subjects,
        run.dataset.joint_sign_y,
        run.dataset.joint_sign_z,
        run.handnet.num_joints,
    )


def _bench_frames(run: RunConfig, count: int = 8) -> List[DepthFrame]:
    """Up to `count` frames of the run's dataset, or synthetic ones without it."""
    try:
        dataset = _dataset(run)
        refs = dataset.samples()[:count]
        reason = f"Dataset root {run.dataset.root!r} holds no frames."
    except DatasetMissing as e:
        refs, reason = [], str(e)
    if not refs:
        warnings.warn(f"{reason} Timing the end-to-end pipeline on synthetic frames.")
        dataset = _synthetic_dataset(run)
        refs = dataset.samples()[:count]
    return [dataset.load(ref)[0] for ref in refs]


def _load_models(
    run: RunConfig, checkpoint: str
) -> Tuple[HandNet, Optional[LocalizationNet]]:
    if not os.path.isfile(checkpoint):
        raise DatasetMissing(f"Checkpoint {checkpoint!r} does not exist.")
    model, manifest = load_checkpoint(checkpoint, HandNet(run.handnet))
    model.eval()
    localizer = None
    name = (manifest or {}).get("localizer_checkpoint")
    if name:
        path = os.path.join(os.path.dirname(checkpoint), name)
        localizer, _ = load_checkpoint(path, LocalizationNet(run.localizer))
        localizer.eval()
    return model, localizer


def cmd_prep(args: argparse.Namespace, manifest: RunManifest) -> int:
    run = _resolve(args)
    manifest.config, manifest.seed = run.to_dict(), run.seed
    root = os.path.join(args.out_dir, "synthetic")
    written = write_synthetic_dataset(
        root,
        run.camera.intrinsics,
        run.dataset.subjects,
        run.dataset.synthetic_gestures,
        run.dataset.synthetic_frames_per_gesture,
        seed=run.seed,
        sign_y=run.dataset.joint_sign_y,
        sign_z=run.dataset.joint_sign_z,
    )
    manifest.outputs["dataset"] = root
    print(f"wrote {len(written)} frames under {root}")
    return EXIT_OK


def cmd_voxelize(args: argparse.Namespace, manifest: RunManifest) -> int:
    run = _resolve(args)
    manifest.config, manifest.seed = run.to_dict(), run.seed
    frame = load_msra_frame(args.frame, run.camera.intrinsics)
    sample = prepare_sample(frame, run.pipeline)
    os.makedirs(args.out_dir, exist_ok=True)
    grid_path = os.path.join(args.out_dir, "grid.bin")
    save_grid(grid_path, sample.grid)
    manifest.outputs["grid"] = grid_path

    x, y, z = sample.reference.position
    print(f"occupancy: {occupancy_count(sample.grid)}")
    print("grid: " + "x".join(str(n) for n in sample.grid.size))
    print(f"pitch_mm: {sample.grid.pitch:.6f}")
    print(f"reference_mm: {x:.3f} {y:.3f} {z:.3f}")
    if args.diagnostic:
        cloud = project_frame(segment_hand(frame, run.pipeline.band_mm))
        scene_path = os.path.join(args.out_dir, "scene_grid.bin")
        scene = voxelize(
            cloud,
            sample.reference.position,
            run.pipeline.diagnostic_grid_size,
            DIAGNOSTIC_PITCH_MM,
        )
        save_grid(scene_path, scene)
        manifest.outputs["scene_grid"] = scene_path
    return EXIT_OK


def cmd_train(args: argparse.Namespace, manifest: RunManifest) -> int:
    run = _resolve(args)
    manifest.config, manifest.seed = run.to_dict(), run.seed
    os.makedirs(args.out_dir, exist_ok=True)
    config_path = os.path.join(args.out_dir, "config.toml")
    with open(config_path, "w") as f:
        toml.dump(run.to_dict(), f)

    result = train(run, _dataset(run))

    checkpoint_meta: Dict[str, Any] = {
        "config": run.to_dict(),
        "num_joints": run.handnet.num_joints,
        "input_size": run.handnet.input_size,
        "parameter_count": result.model.parameter_count(),
        "steps": len(result.history),
        "final_loss": result.history[-1].loss if result.history else None,
        "localizer_checkpoint": None,
    }
    if result.localizer is not None:
        localizer_path = os.path.join(args.out_dir, LOCALIZER_CHECKPOINT)
        save_checkpoint(localizer_path, result.localizer, {"config": run.to_dict()})
        checkpoint_meta["localizer_checkpoint"] = LOCALIZER_CHECKPOINT
        manifest.outputs["localizer"] = localizer_path
    checkpoint = os.path.join(args.out_dir, HANDNET_CHECKPOINT)
    save_checkpoint(checkpoint, result.model, checkpoint_meta)

    loss_path = os.path.join(args.out_dir, "loss_history.csv")
    write_loss_history_csv(loss_path, [r.as_row() for r in result.history])
    manifest.outputs.update(
        {"checkpoint": checkpoint, "loss_history": loss_path, "config": config_path}
    )
    print(f"trained {len(result.history)} steps, checkpoint {checkpoint}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, manifest: RunManifest) -> int:
    if args.checkpoint is None and not args.oracle:
        raise ConfigInvalid("eval needs --checkpoint unless --oracle is given.")
    run = _resolve(args, args.checkpoint)
    manifest.config, manifest.seed = run.to_dict(), run.seed
    dataset = _dataset(run)
    _, test_subjects = loso_split(dataset.subjects, run.train.held_out_subject)
    refs = dataset.samples_for(test_subjects)
    if args.frames:
        refs = refs[: args.frames]

    if args.checkpoint is not None:
        model, localizer = _load_models(run, args.checkpoint)
    else:
        model, localizer = HandNet(run.handnet), None
    report, _, _ = evaluate(model, dataset, refs, run, localizer, oracle=args.oracle)

    os.makedirs(args.out_dir, exist_ok=True)
    outputs = {
        "per_joint_error": os.path.join(args.out_dir, "per_joint_error.csv"),
        "success_curve": os.path.join(args.out_dir, "success_curve.csv"),
        "report": os.path.join(args.out_dir, "report.json"),
    }
    write_per_joint_csv(outputs["per_joint_error"], report)
    write_success_curve_csv(outputs["success_curve"], report)
    write_report_json(outputs["report"], report)
    manifest.outputs.update(outputs)
    print(
        f"{report.frames_evaluated} frames, mean joint error "
        f"{report.overall_mean_error:.2f} mm"
    )
    return EXIT_OK


def cmd_bench(args: argparse.Namespace, manifest: RunManifest) -> int:
    run = _resolve(args, args.checkpoint)
    # Checkpoints load into a network of any input size.
    size = run.bench.input_size
    if size != run.handnet.input_size:
        run = _resolve(args, args.checkpoint, input_size_overrides(size))
    manifest.config, manifest.seed = run.to_dict(), run.seed
    if args.checkpoint is not None:
        model, localizer = _load_models(run, args.checkpoint)
    else:
        model, localizer = HandNet(run.handnet, seed=run.seed), None

    bench = run.bench
    reports = [benchmark_inference(model, bench.frames, size, bench.warmup, run.seed)]
    if bench.end_to_end:
        frames = _bench_frames(run)
        reports.append(
            benchmark_end_to_end(
                model, frames, run.pipeline, localizer, bench.frames, bench.warmup
            )
        )

    os.makedirs(args.out_dir, exist_ok=True)
    path = os.path.join(args.out_dir, "bench.json")
    with open(path, "w") as f:
        json.dump([dataclasses.asdict(r) for r in reports], f, indent=2)
    manifest.outputs["bench"] = path
    for report in reports:
        print(report.summary())
    return EXIT_OK


def cmd_predict(args: argparse.Namespace, manifest: RunManifest) -> int:
    run = _resolve(args, args.checkpoint)
    manifest.config, manifest.seed = run.to_dict(), run.seed
    model, localizer = _load_models(run, args.checkpoint)
    frame = load_msra_frame(args.frame, run.camera.intrinsics)
    sample = prepare_sample(frame, run.pipeline, localizer=localizer)
    grids, _, centers = stack_samples([sample])
    (joints,) = forward_handnet(model, grids, Mode.Eval, references=centers)
    print(
        json.dumps(
            {
                "joint_names": run.joint_names(),
                "joints_mm": joints.joints.tolist(),
            }
        )
    )
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """Runs the command line.

    Args:
        argv (Optional[List[str]]): Arguments without the program name.

    Returns:
        int: Exit code.
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_CONFIG

    logging.basicConfig(
        level=args.log_level, format="%(asctime)s %(levelname)s %(message)s"
    )
    manifest = RunManifest(command=args.command, argv=argv)
    try:
        code = args.handler(args, manifest)
    except USAGE_ERRORS as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        code = EXIT_CONFIG
    except DataError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        code = EXIT_DATA
    except Exception as e:
        logging.exception(f"{args.command} failed")
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        code = EXIT_INTERNAL

    manifest.finished_at = _now()
    manifest.exit_code = code
    manifest.write(args.out_dir)
    return code
