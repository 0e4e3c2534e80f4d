# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

import os
import struct
from typing import List, Sequence

import numpy as np

from voxhand.errors import CountMismatch, MalformedHeader, ParseError, TruncatedFile
from voxhand.ingest.frame import CameraIntrinsics, DepthFrame, JointSet

HEADER_FORMAT = "<6i"
HEADER_BYTES = struct.calcsize(HEADER_FORMAT)
MSRA_NUM_JOINTS = 21


def load_msra_frame(
    path: str,
    intrinsics: CameraIntrinsics,
    subject_id: str = "",
    gesture_id: str = "",
    frame_index: int = 0,
) -> DepthFrame:
    """Reads one `<NNNNNN>_depth.bin` file of the MSRA hand gesture release.

    The file starts with six little-endian int32 values (width, height, left,
    top, right, bottom) followed by float32 depth values in mm for the bbox.

    Args:
        path (str): Path of the binary depth file.
        intrinsics (CameraIntrinsics): Camera of the dataset.
        subject_id (str): Subject the frame belongs to.
        gesture_id (str): Gesture the frame belongs to.
        frame_index (int): Index of the frame within the gesture.

    Returns:
        DepthFrame: The parsed frame.

    Raises:
        TruncatedFile: If the file is shorter than a header or its payload size
            does not match the bbox.
        MalformedHeader: If the bbox has negative extents or leaves the image.
    """
    with open(path, "rb") as f:
        raw = f.read()

    if len(raw) < HEADER_BYTES:
        raise TruncatedFile(
            f"{path} holds {len(raw)} bytes, a header alone needs {HEADER_BYTES}."
        )
    width, height, left, top, right, bottom = struct.unpack_from(HEADER_FORMAT, raw)
    if not (
        width > 0
        and height > 0
        and 0 <= left <= right <= width
        and 0 <= top <= bottom <= height
    ):
        raise MalformedHeader(
            f"{path}: bbox ({left}, {top}, {right}, {bottom}) does not fit a "
            f"{width}x{height} image."
        )

    expected = (right - left) * (bottom - top)
    payload = raw[HEADER_BYTES:]
    if len(payload) != 4 * expected:
        raise TruncatedFile(
            f"{path}: expected {expected} float32 depth values "
            f"({4 * expected} bytes), found {len(payload)} bytes."
        )
    depth = np.frombuffer(payload, dtype="<f4").astype(np.float32)
    if np.any(depth < 0) or not np.all(np.isfinite(depth)):
        raise MalformedHeader(f"{path}: depth payload holds negative or NaN values.")

    return DepthFrame(
        width=width,
        height=height,
        bbox=(left, top, right, bottom),
        depth=depth,
        intrinsics=intrinsics,
        subject_id=subject_id,
        gesture_id=gesture_id,
        frame_index=frame_index,
    )


def save_msra_frame(path: str, frame: DepthFrame) -> None:
    """Writes a frame in the MSRA binary layout read by `load_msra_frame`.

    Args:
        path (str): Destination file.
        frame (DepthFrame): Frame to serialize.
    """
    header = struct.pack(HEADER_FORMAT, frame.width, frame.height, *frame.bbox)
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(frame.depth, dtype="<f4").tobytes())


def load_msra_joints(
    path: str,
    sign_y: float = -1.0,
    sign_z: float = -1.0,
    num_joints: int = MSRA_NUM_JOINTS,
) -> List[JointSet]:
    """Reads a `joint.txt` file of the MSRA release.

    Line one holds the frame count M, every following line 3 * num_joints reals.
    The y and z columns are multiplied by `sign_y` and `sign_z` to bring the
    release's convention into the positive-z camera frame.

    Args:
        path (str): Path of the joint file.
        sign_y (float): Factor applied to every y coordinate.
        sign_z (float): Factor applied to every z coordinate.
        num_joints (int): Joints per frame. (default: `21`)

    Returns:
        List[JointSet]: One JointSet per frame, in file order.

    Raises:
        CountMismatch: If the number of frame lines differs from M.
        ParseError: If a token is not a number or a line has the wrong width.
    """
    with open(path) as f:
        lines = [line for line in f.read().splitlines() if line.strip()]

    if not lines:
        raise ParseError(f"{path} is empty.")
    try:
        count = int(lines[0].strip())
    except ValueError:
        raise ParseError(f"{path}: first line {lines[0]!r} is not a frame count.")

    rows = lines[1:]
    if len(rows) != count:
        raise CountMismatch(
            f"{path} announces {count} frames but holds {len(rows)} joint lines."
        )

    signs = np.array([1.0, sign_y, sign_z])
    joint_sets = []
    for line_number, row in enumerate(rows, start=2):
        tokens = row.split()
        if len(tokens) != 3 * num_joints:
            raise ParseError(
                f"{path}:{line_number}: expected {3 * num_joints} values, "
                f"found {len(tokens)}."
            )
        try:
            values = np.array([float(token) for token in tokens], dtype=np.float64)
        except ValueError as e:
            raise ParseError(f"{path}:{line_number}: {e}")
        joint_sets.append(JointSet(joints=values.reshape(num_joints, 3) * signs))

    return joint_sets


def save_msra_joints(
    path: str,
    joint_sets: Sequence[JointSet],
    sign_y: float = -1.0,
    sign_z: float = -1.0,
) -> None:
    """Writes joints in the `joint.txt` layout read by `load_msra_joints`.

    The sign factors are applied again on the way out, so saving and loading
    with the same factors is the identity.

    Args:
        path (str): Destination file.
        joint_sets (Sequence[JointSet]): Frames to serialize.
        sign_y (float): Factor applied to every y coordinate.
        sign_z (float): Factor applied to every z coordinate.
    """
    signs = np.array([1.0, sign_y, sign_z])
    with open(path, "w") as f:
        f.write(f"{len(joint_sets)}\n")
        for joint_set in joint_sets:
            values = (joint_set.joints * signs).reshape(-1)
            f.write(" ".join(repr(float(v)) for v in values) + "\n")


def depth_file_name(frame_index: int) -> str:
    """
    Args:
        frame_index (int): Index of a frame within its gesture directory.

    Returns:
        str: File name of that frame, e.g. `000042_depth.bin`.
    """
    return f"{str(frame_index).zfill(6)}_depth.bin"


def gesture_directories(subject_dir: str) -> List[str]:
    """Lists the gesture directories of one subject in sorted order.

    Args:
        subject_dir (str): Directory of one subject.

    Returns:
        List[str]: Gesture directory names.
    """
    return sorted(
        name
        for name in os.listdir(subject_dir)
        if os.path.isdir(os.path.join(subject_dir, name))
    )
