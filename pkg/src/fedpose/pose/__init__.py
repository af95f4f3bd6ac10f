"""Pose dataset pipeline: ingestion, reduction, windowing, splits, synthesis."""

from fedpose.pose.io import load_frames, load_windows, save_frames, save_windows
from fedpose.pose.preprocess import (
    fill_low_confidence,
    merge_facial_keypoints,
    normalize_frame,
    recording_to_windows,
    slide_windows,
)
from fedpose.pose.splits import (
    build_fedensemble_partition,
    partition_windows,
    stratified_split,
)
from fedpose.pose.synthetic import SyntheticSpec, synthesize_dataset
from fedpose.pose.types import (
    FRAME_DIM,
    GESTURE_NAMES,
    NUM_CLASSES,
    NUM_JOINTS,
    WINDOW_LEN,
    ClientDataset,
    GestureLabel,
    PartitionPlan,
    PoseFrame,
    RawKeypointFrame,
    WindowSample,
    class_histogram,
    stack_windows,
)

__all__ = [
    "FRAME_DIM",
    "GESTURE_NAMES",
    "NUM_CLASSES",
    "NUM_JOINTS",
    "WINDOW_LEN",
    "ClientDataset",
    "GestureLabel",
    "PartitionPlan",
    "PoseFrame",
    "RawKeypointFrame",
    "SyntheticSpec",
    "WindowSample",
    "build_fedensemble_partition",
    "class_histogram",
    "fill_low_confidence",
    "load_frames",
    "load_windows",
    "merge_facial_keypoints",
    "normalize_frame",
    "partition_windows",
    "recording_to_windows",
    "save_frames",
    "save_windows",
    "slide_windows",
    "stack_windows",
    "stratified_split",
    "synthesize_dataset",
]
