# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

import logging
import os
from abc import ABC, abstractmethod
from typing import Dict, List, Optional, Sequence, Tuple

from pydantic.dataclasses import dataclass

from voxhand.errors import DatasetMissing, UnknownSubject
from voxhand.ingest.frame import CameraIntrinsics, DepthFrame, JointSet
from voxhand.ingest.msra import (
    MSRA_NUM_JOINTS,
    depth_file_name,
    gesture_directories,
    load_msra_frame,
    load_msra_joints,
)
from voxhand.ingest.synthetic import frame_seed, synth_frame

JOINT_FILE = "joint.txt"


@dataclass(frozen=True)
class SampleRef:
    """Address of one frame inside a dataset.

    Args:
        subject_id (str): Subject directory name, e.g. `P3`.
        gesture_id (str): Gesture directory name.
        frame_index (int): Frame index inside the gesture.
        path (str): Depth file path; empty for generated frames.
    """

    subject_id: str
    gesture_id: str
    frame_index: int
    path: str = ""


class HandDataset(ABC):
    """Frames with ground-truth joints, grouped by subject and gesture."""

    def __init__(self, intrinsics: CameraIntrinsics, subjects: Sequence[str]):
        """
        Args:
            intrinsics (CameraIntrinsics): Camera of every frame.
            subjects (Sequence[str]): Subject ids in dataset order.
        """
        self.intrinsics = intrinsics
        self.subjects = list(subjects)

    @abstractmethod
    def samples(self) -> List[SampleRef]:
        """
        Returns:
            List[SampleRef]: Every frame, ordered by subject, gesture and index.
        """

    @abstractmethod
    def load(self, ref: SampleRef) -> Tuple[DepthFrame, JointSet]:
        """Reads one frame and its ground truth.

        Args:
            ref (SampleRef): Frame to read.

        Returns:
            Tuple[DepthFrame, JointSet]: The frame and its joints in mm.
        """

    def __len__(self) -> int:
        return len(self.samples())

    def samples_for(self, subjects: Sequence[str]) -> List[SampleRef]:
        """Frames of the given subjects, in dataset order.

        Raises:
            UnknownSubject: If a subject is not part of the dataset.
        """
        for subject in subjects:
            if subject not in self.subjects:
                raise UnknownSubject(
                    f"Subject {subject!r} is not in the dataset {self.subjects}."
                )
        wanted = set(subjects)
        return [ref for ref in self.samples() if ref.subject_id in wanted]


class MsraDataset(HandDataset):
    """The MSRA hand gesture layout: `<root>/<subject>/<gesture>/`.

    Every gesture directory holds `joint.txt` and one `<NNNNNN>_depth.bin` per
    line of it. Joint files are read up front; depth files when a frame is
    loaded. The first depth file is parsed at construction so a truncated or
    foreign dataset fails early.

    Args:
        root (str): Dataset root.
        intrinsics (CameraIntrinsics): Camera of the release.
        subjects (Optional[Sequence[str]]): Subjects to use; all subject
            directories under `root` when omitted.
        sign_y (float): Joint y sign factor.
        sign_z (float): Joint z sign factor.
        num_joints (int): Joints per frame.

    Raises:
        DatasetMissing: If `root`, a subject directory or every frame is missing.
    """

    def __init__(
        self,
        root: str,
        intrinsics: CameraIntrinsics,
        subjects: Optional[Sequence[str]] = None,
        sign_y: float = -1.0,
        sign_z: float = -1.0,
        num_joints: int = MSRA_NUM_JOINTS,
    ):
        if not os.path.isdir(root):
            raise DatasetMissing(f"Dataset root {root!r} does not exist.")
        if subjects is None:
            subjects = sorted(
                name
                for name in os.listdir(root)
                if os.path.isdir(os.path.join(root, name))
            )
        super().__init__(intrinsics, subjects)
        self.root = root
        self.sign_y = sign_y
        self.sign_z = sign_z
        self.num_joints = num_joints
        self._refs: List[SampleRef] = []
        self._joints: Dict[Tuple[str, str], List[JointSet]] = {}
        self._scan()

        if not self._refs:
            raise DatasetMissing(f"No frames found under {root!r}.")
        self.load(self._refs[0])
        logging.info(
            f"Indexed {len(self._refs)} frames of {len(self.subjects)} subjects "
            f"under {root}"
        )

    def _scan(self) -> None:
        for subject in self.subjects:
            subject_dir = os.path.join(self.root, subject)
            if not os.path.isdir(subject_dir):
                raise DatasetMissing(f"Subject directory {subject_dir!r} is missing.")
            for gesture in gesture_directories(subject_dir):
                joint_path = os.path.join(subject_dir, gesture, JOINT_FILE)
                if not os.path.isfile(joint_path):
                    logging.warning(f"Skipping {subject}/{gesture}: no {JOINT_FILE}")
                    continue
                joints = load_msra_joints(
                    joint_path, self.sign_y, self.sign_z, self.num_joints
                )
                self._joints[(subject, gesture)] = joints
                for index in range(len(joints)):
                    path = os.path.join(subject_dir, gesture, depth_file_name(index))
                    self._refs.append(SampleRef(subject, gesture, index, path))

    def samples(self) -> List[SampleRef]:
        return list(self._refs)

    def load(self, ref: SampleRef) -> Tuple[DepthFrame, JointSet]:
        if not os.path.isfile(ref.path):
            raise DatasetMissing(f"Depth file {ref.path!r} is missing.")
        frame = load_msra_frame(
            ref.path, self.intrinsics, ref.subject_id, ref.gesture_id, ref.frame_index
        )
        return frame, self._joints[(ref.subject_id, ref.gesture_id)][ref.frame_index]


class SyntheticDataset(HandDataset):
    """Rendered hands addressed like MSRA frames, generated on demand.

    Frame content depends only on (seed, subject position, gesture position,
    frame index), matching what `write_synthetic_dataset` writes to disk.

    Args:
        intrinsics (CameraIntrinsics): Camera used for rendering.
        subjects (Sequence[str]): Subject ids.
        gestures (Sequence[str]): Gesture ids.
        frames_per_gesture (int): Frames per gesture.
        seed (int): Dataset seed.
    """

    def __init__(
        self,
        intrinsics: CameraIntrinsics,
        subjects: Sequence[str],
        gestures: Sequence[str],
        frames_per_gesture: int,
        seed: int = 0,
    ):
        super().__init__(intrinsics, subjects)
        if frames_per_gesture < 1:
            raise ValueError(
                f"frames_per_gesture must be positive, got {frames_per_gesture}."
            )
        self.gestures = list(gestures)
        self.frames_per_gesture = frames_per_gesture
        self.seed = seed

    def samples(self) -> List[SampleRef]:
        return [
            SampleRef(subject, gesture, index)
            for subject in self.subjects
            for gesture in self.gestures
            for index in range(self.frames_per_gesture)
        ]

    def load(self, ref: SampleRef) -> Tuple[DepthFrame, JointSet]:
        seed = frame_seed(
            self.seed,
            self.subjects.index(ref.subject_id),
            self.gestures.index(ref.gesture_id),
            ref.frame_index,
        )
        frame, joints = synth_frame(seed, self.intrinsics)
        frame = DepthFrame(
            width=frame.width,
            height=frame.height,
            bbox=frame.bbox,
            depth=frame.depth,
            intrinsics=frame.intrinsics,
            subject_id=ref.subject_id,
            gesture_id=ref.gesture_id,
            frame_index=ref.frame_index,
        )
        return frame, joints
