# Copyright (c) 2026 The voxhand Authors.
#
# Licensed under the MIT License (the "License");
# you may not use this file except in compliance with the License.
#
# You may obtain a copy of the License in the LICENSE file at the top
# level of this repository.

from typing import Tuple

import numpy as np
from pydantic.dataclasses import dataclass


class ArrayConfig:
    arbitrary_types_allowed = True


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics of a depth camera.

    Args:
        fp (float): Focal length along image x, in pixels.
        fq (float): Focal length along image y, in pixels.
        cp (float): Principal point x, in pixels. (default: `0.0`)
        cq (float): Principal point y, in pixels. (default: `0.0`)
    """

    fp: float
    fq: float
    cp: float = 0.0
    cq: float = 0.0

    def __post_init__(self) -> None:
        if not (self.fp > 0 and self.fq > 0):
            raise ValueError(
                f"Focal lengths must be positive, got fp={self.fp}, fq={self.fq}."
            )


@dataclass(frozen=True, eq=False, config=ArrayConfig)
class JointSet:
    """Joint coordinates of one hand pose in mm, camera frame.

    Args:
        joints (np.ndarray): Array of shape (F, 3) holding (x, y, z) per joint.
    """

    joints: np.ndarray

    def __post_init__(self) -> None:
        joints = np.array(self.joints, dtype=np.float64, copy=True)
        if joints.ndim != 2 or joints.shape[1] != 3:
            raise ValueError(f"Joints must have shape (F, 3), got {joints.shape}.")
        if not np.all(np.isfinite(joints)):
            raise ValueError("Joint coordinates must all be finite.")
        joints.setflags(write=False)
        object.__setattr__(self, "joints", joints)

    @property
    def num_joints(self) -> int:
        """
        Returns:
            int: Joint count F.
        """
        return self.joints.shape[0]

    @property
    def center(self) -> np.ndarray:
        """
        Returns:
            np.ndarray: Mean of all joints, the hand center used to supervise
                the localizer.
        """
        return self.joints.mean(axis=0)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, JointSet):
            return NotImplemented
        return np.array_equal(self.joints, other.joints)


@dataclass(frozen=True, eq=False, config=ArrayConfig)
class DepthFrame:
    """A depth image cropped to a bounding box.

    Only the bounding-box region is stored; pixels outside it carry no return.

    Args:
        width (int): Full image width in pixels.
        height (int): Full image height in pixels.
        bbox (Tuple[int, int, int, int]): (left, top, right, bottom) in pixels.
        depth (np.ndarray): Depth values in mm for the bbox region, row-major,
            0 where the camera saw nothing. Flat arrays are reshaped.
        intrinsics (CameraIntrinsics): Camera the frame was captured with.
        subject_id (str): Dataset subject, e.g. `"P3"`. (default: `""`)
        gesture_id (str): Dataset gesture directory. (default: `""`)
        frame_index (int): Index of the frame inside its gesture. (default: `0`)
    """

    width: int
    height: int
    bbox: Tuple[int, int, int, int]
    depth: np.ndarray
    intrinsics: CameraIntrinsics
    subject_id: str = ""
    gesture_id: str = ""
    frame_index: int = 0

    def __post_init__(self) -> None:
        self._validate_bbox()
        self._validate_depth()

    @property
    def left(self) -> int:
        return self.bbox[0]

    @property
    def top(self) -> int:
        return self.bbox[1]

    @property
    def rows(self) -> int:
        """
        Returns:
            int: Height of the bbox region.
        """
        return self.bbox[3] - self.bbox[1]

    @property
    def cols(self) -> int:
        """
        Returns:
            int: Width of the bbox region.
        """
        return self.bbox[2] - self.bbox[0]

    def to_image(self) -> np.ndarray:
        """Pastes the bbox region into a full-resolution zero image.

        Returns:
            np.ndarray: Array of shape (height, width), float32, mm.
        """
        image = np.zeros((self.height, self.width), dtype=np.float32)
        left, top, right, bottom = self.bbox
        image[top:bottom, left:right] = self.depth
        return image

    def with_depth(self, depth: np.ndarray) -> "DepthFrame":
        """Returns a copy of this frame carrying different depth values.

        Args:
            depth (np.ndarray): Replacement depth of the same bbox shape.

        Returns:
            DepthFrame: The new frame.
        """
        return DepthFrame(
            width=self.width,
            height=self.height,
            bbox=self.bbox,
            depth=depth,
            intrinsics=self.intrinsics,
            subject_id=self.subject_id,
            gesture_id=self.gesture_id,
            frame_index=self.frame_index,
        )

    def _validate_bbox(self) -> None:
        """Validates that the bbox has non-negative extents inside the image.

        Raises:
            ValueError: If the bbox leaves [0, width] x [0, height].
        """
        left, top, right, bottom = self.bbox
        if not (0 <= left <= right <= self.width and 0 <= top <= bottom <= self.height):
            raise ValueError(
                f"Bounding box {self.bbox} does not fit a "
                f"{self.width}x{self.height} image."
            )

    def _validate_depth(self) -> None:
        """Validates the depth payload length and sign, and freezes it.

        Raises:
            ValueError: If the payload size differs from the bbox area or holds
                negative or non-finite values.
        """
        depth = np.array(self.depth, dtype=np.float32, copy=True)
        if depth.size != self.rows * self.cols:
            raise ValueError(
                f"Depth payload has {depth.size} values, bbox {self.bbox} needs "
                f"{self.rows * self.cols}."
            )
        depth = depth.reshape(self.rows, self.cols)
        if not np.all(np.isfinite(depth)) or np.any(depth < 0):
            raise ValueError("Depth values must be finite and non-negative.")
        depth.setflags(write=False)
        object.__setattr__(self, "depth", depth)
