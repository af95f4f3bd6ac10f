"""Core data types for the pose pipeline."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from fedpose.errors import DataFormatError

# Canonical 8-class gesture vocabulary, alphabetical, index order fixed.
GESTURE_NAMES = ("down", "grab", "left", "nothing", "right", "stop", "ungrab", "up")
NUM_CLASSES = len(GESTURE_NAMES)


class GestureLabel(enum.IntEnum):
    """Gesture class; integer value doubles as the class index."""

    down = 0
    grab = 1
    left = 2
    nothing = 3
    right = 4
    stop = 5
    ungrab = 6
    up = 7

    @classmethod
    def from_name(cls, name: str) -> "GestureLabel":
        try:
            return cls[name]
        except KeyError:
            raise DataFormatError(
                f"unknown gesture label {name!r}; expected one of {GESTURE_NAMES}"
            ) from None


# COCO-17 keypoint indices (x, y, confidence triples, in this order).
COCO_KEYPOINT_NAMES = (
    "nose", "left_eye", "right_eye", "left_ear", "right_ear",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
    "left_wrist", "right_wrist", "left_hip", "right_hip",
    "left_knee", "right_knee", "left_ankle", "right_ankle",
)
NUM_COCO_KEYPOINTS = 17
FACIAL_KEYPOINT_INDICES = (0, 1, 2, 3, 4)  # merged into the single head joint

# Reduced 13-joint skeleton: head followed by the 12 COCO body joints.
JOINT_NAMES = ("head",) + COCO_KEYPOINT_NAMES[5:]
NUM_JOINTS = 13
FRAME_DIM = 2 * NUM_JOINTS  # 26 reals per frame
WINDOW_LEN = 20              # frames per window sample


@dataclass
class RawKeypointFrame:
    """One COCO-17 detection: (17, 3) array of (x, y, confidence)."""

    client_id: str
    recording_id: str
    frame_index: int
    label: GestureLabel
    keypoints: np.ndarray

    def __post_init__(self):
        self.keypoints = np.asarray(self.keypoints, dtype=np.float64)
        if self.keypoints.shape != (NUM_COCO_KEYPOINTS, 3):
            raise DataFormatError(
                f"expected {NUM_COCO_KEYPOINTS} (x, y, confidence) keypoints, "
                f"got array of shape {self.keypoints.shape}"
            )
        if self.frame_index < 0:
            raise DataFormatError(f"negative frame index {self.frame_index}")


@dataclass
class PoseFrame:
    """Reduced 13-joint frame: 26 reals laid out joint-major (x, y pairs)."""

    coords: np.ndarray
    label: GestureLabel

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        if self.coords.shape != (FRAME_DIM,):
            raise DataFormatError(
                f"pose frame must hold {FRAME_DIM} coordinates, got shape "
                f"{self.coords.shape}"
            )


@dataclass
class WindowSample:
    """20 consecutive same-label frames from one recording.

    `coords` is the stacked (20, 26) array, frame-major. `uid` identifies
    the window across splits and partitions (contamination checks key on it).
    """

    coords: np.ndarray
    label: GestureLabel
    client_id: str
    uid: str

    def __post_init__(self):
        self.coords = np.ascontiguousarray(self.coords, dtype=np.float64)
        if self.coords.shape != (WINDOW_LEN, FRAME_DIM):
            raise DataFormatError(
                f"window must be {WINDOW_LEN}x{FRAME_DIM}, got {self.coords.shape}"
            )


@dataclass
class ClientDataset:
    """One client's disjoint train/val/test window lists."""

    client_id: str
    train: list[WindowSample] = field(default_factory=list)
    val: list[WindowSample] = field(default_factory=list)
    test: list[WindowSample] = field(default_factory=list)

    def all_windows(self) -> list[WindowSample]:
        return list(self.train) + list(self.val) + list(self.test)


@dataclass
class PartitionPlan:
    """Assignment of window uids to K partitions."""

    mode: str  # "by_subject" | "fedensemble_iid"
    assignments: dict[str, int]
    num_partitions: int


def class_histogram(windows) -> np.ndarray:
    """Counts per gesture class, canonical order."""
    counts = np.zeros(NUM_CLASSES, dtype=np.int64)
    for w in windows:
        counts[int(w.label)] += 1
    return counts


def stack_windows(windows) -> tuple[np.ndarray, np.ndarray]:
    """Batch a window list into (N, 20, 26) inputs and (N,) int labels."""
    x = np.stack([w.coords for w in windows]).astype(np.float64)
    y = np.array([int(w.label) for w in windows], dtype=np.int64)
    return x, y
