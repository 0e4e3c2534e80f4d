# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

import logging
import os
from typing import List, Sequence, Tuple

import numpy as np

import voxhand.geometry as geometry
from voxhand.ingest.frame import CameraIntrinsics, DepthFrame, JointSet
from voxhand.ingest.msra import depth_file_name, save_msra_frame, save_msra_joints

IMAGE_WIDTH = 320
IMAGE_HEIGHT = 240
BBOX_MARGIN = 4

# (angle from the palm's up axis in radians, length in mm), in joint-file order.
FINGERS = (
    ("index", -0.30, 70.0),
    ("middle", -0.05, 78.0),
    ("ring", 0.20, 72.0),
    ("little", 0.45, 58.0),
    ("thumb", -1.20, 55.0),
)
FINGER_WIDTH_MM = 16.0
# Fractions along a finger for its mcp, pip, dip and tip joints.
JOINT_FRACTIONS = (0.0, 0.4, 0.7, 0.95)


def synth_frame(
    seed: int,
    intrinsics: CameraIntrinsics,
    width: int = IMAGE_WIDTH,
    height: int = IMAGE_HEIGHT,
) -> Tuple[DepthFrame, JointSet]:
    """Renders a hand-like depth frame with consistent 21-joint ground truth.

    The pattern is an elliptic palm with five finger bars, all between 400 and
    800 mm deep. Joints sit on the rendered surface: every joint is the
    back-projection of a rendered pixel, so it projects back inside the bbox.

    Args:
        seed (int): Seed of all random choices; equal seeds give bit-identical
            output.
        intrinsics (CameraIntrinsics): Camera used for rendering.
        width (int): Image width in pixels. (default: `320`)
        height (int): Image height in pixels. (default: `240`)

    Returns:
        Tuple[DepthFrame, JointSet]: The frame and its joints in mm.
    """
    rng = np.random.default_rng(seed)
    z0 = rng.uniform(480.0, 680.0)
    scale = rng.uniform(0.9, 1.1)
    mm_to_px = intrinsics.fp / z0

    center_p = width / 2.0 + rng.uniform(-20.0, 20.0)
    center_q = height / 2.0 + rng.uniform(-15.0, 15.0)
    roll = rng.uniform(-0.3, 0.3)
    palm_radius = rng.uniform(40.0, 50.0) * scale * mm_to_px

    qq, pp = np.mgrid[0:height, 0:width].astype(np.float64)
    image = np.zeros((height, width), dtype=np.float64)

    # Palm: ellipse elongated along the finger axis, bulging away from the camera.
    up = np.array([np.sin(roll), -np.cos(roll)])
    side = np.array([-up[1], up[0]])
    du = (pp - center_p) * up[0] + (qq - center_q) * up[1]
    ds = (pp - center_p) * side[0] + (qq - center_q) * side[1]
    ellipse = (ds / palm_radius) ** 2 + (du / (1.15 * palm_radius)) ** 2
    palm = ellipse <= 1.0
    image[palm] = z0 + 15.0 * ellipse[palm]

    reach = 0.9 * palm_radius
    anchors = [(center_p - reach * up[0], center_q - reach * up[1])]
    half_width = 0.5 * FINGER_WIDTH_MM * scale * mm_to_px
    for _, angle, length_mm in FINGERS:
        direction = np.array(
            [np.sin(roll + angle), -np.cos(roll + angle)], dtype=np.float64
        )
        start = np.array([center_p, center_q]) + 0.8 * palm_radius * direction
        length = length_mm * scale * rng.uniform(0.9, 1.1) * mm_to_px

        # Distance of every pixel to the finger's axis segment.
        t = ((pp - start[0]) * direction[0] + (qq - start[1]) * direction[1]) / length
        t = np.clip(t, 0.0, 1.0)
        dist = np.hypot(
            pp - (start[0] + t * length * direction[0]),
            qq - (start[1] + t * length * direction[1]),
        )
        finger = dist <= half_width
        finger_depth = z0 - 10.0 - 5.0 * t
        overlap = finger & (image > 0)
        image[finger & ~overlap] = finger_depth[finger & ~overlap]
        image[overlap] = np.minimum(image[overlap], finger_depth[overlap])

        for fraction in JOINT_FRACTIONS:
            anchors.append(tuple(start + fraction * length * direction))

    image = image.astype(np.float32)
    joints = np.zeros((len(anchors), 3), dtype=np.float64)
    for i, (p, q) in enumerate(anchors):
        row = int(np.clip(round(q), 0, height - 1))
        col = int(np.clip(round(p), 0, width - 1))
        depth = float(image[row, col]) if image[row, col] > 0 else z0
        joints[i] = geometry.project_pixel_to_world(p, q, depth, intrinsics)

    rows = np.flatnonzero(image.max(axis=1) > 0)
    cols = np.flatnonzero(image.max(axis=0) > 0)
    left = max(int(cols[0]) - BBOX_MARGIN, 0)
    top = max(int(rows[0]) - BBOX_MARGIN, 0)
    right = min(int(cols[-1]) + 1 + BBOX_MARGIN, width)
    bottom = min(int(rows[-1]) + 1 + BBOX_MARGIN, height)

    frame = DepthFrame(
        width=width,
        height=height,
        bbox=(left, top, right, bottom),
        depth=image[top:bottom, left:right],
        intrinsics=intrinsics,
        subject_id="synthetic",
        gesture_id="0",
        frame_index=int(seed),
    )
    return frame, JointSet(joints=joints)


def frame_seed(seed: int, subject: int, gesture: int, index: int) -> int:
    """Derives the per-frame seed of a synthetic dataset.

    Args:
        seed (int): Dataset seed.
        subject (int): Subject position.
        gesture (int): Gesture position.
        index (int): Frame index inside the gesture.

    Returns:
        int: Seed passed to `synth_frame`.
    """
    state = np.random.SeedSequence([seed, subject, gesture, index]).generate_state(1)
    return int(state[0])


def write_synthetic_dataset(
    root: str,
    intrinsics: CameraIntrinsics,
    subjects: Sequence[str],
    gestures: Sequence[str],
    frames_per_gesture: int,
    seed: int = 0,
    sign_y: float = -1.0,
    sign_z: float = -1.0,
) -> List[str]:
    """Writes a synthetic dataset in the MSRA directory layout.

    Each `<root>/<subject>/<gesture>/` receives `joint.txt` and one
    `<NNNNNN>_depth.bin` per frame, so every downstream stage reads synthetic
    and recorded data the same way.

    Args:
        root (str): Dataset root directory (created if needed).
        intrinsics (CameraIntrinsics): Camera used for rendering.
        subjects (Sequence[str]): Subject directory names.
        gestures (Sequence[str]): Gesture directory names.
        frames_per_gesture (int): Frames rendered per gesture.
        seed (int): Dataset seed. (default: `0`)
        sign_y (float): y sign factor of the joint file convention.
        sign_z (float): z sign factor of the joint file convention.

    Returns:
        List[str]: Paths of all depth files written.
    """
    written = []
    for s, subject in enumerate(subjects):
        for g, gesture in enumerate(gestures):
            gesture_dir = os.path.join(root, subject, gesture)
            os.makedirs(gesture_dir, exist_ok=True)
            joint_sets = []
            for i in range(frames_per_gesture):
                frame, joints = synth_frame(frame_seed(seed, s, g, i), intrinsics)
                path = os.path.join(gesture_dir, depth_file_name(i))
                save_msra_frame(path, frame)
                joint_sets.append(joints)
                written.append(path)
            save_msra_joints(
                os.path.join(gesture_dir, "joint.txt"),
                joint_sets,
                sign_y=sign_y,
                sign_z=sign_z,
            )
    logging.info(f"Wrote {len(written)} synthetic frames under {root}")
    return written
