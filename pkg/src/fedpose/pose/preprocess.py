"""Frame-level preprocessing: confidence fill, facial merge, normalization, windowing."""

from __future__ import annotations

import numpy as np

from fedpose.errors import ConfigError
from fedpose.pose.types import (
    FACIAL_KEYPOINT_INDICES,
    FRAME_DIM,
    WINDOW_LEN,
    PoseFrame,
    RawKeypointFrame,
    WindowSample,
)

# Keypoints below this confidence are treated as missing and carried
# forward from the previous frame (or pinned to image center).
LOW_CONFIDENCE = 0.05
_CENTER_XY = (0.5, 0.5)


def fill_low_confidence(
    frames: list[RawKeypointFrame], threshold: float = LOW_CONFIDENCE
) -> list[RawKeypointFrame]:
    """Replace low-confidence keypoints within one recording.

    A keypoint with confidence < threshold takes the previous frame's
    (x, y) for that joint; with no previous value it is pinned to the
    image center expressed in the frame's own coordinate scale (the
    median of the confident keypoints' bounding box midpoint is not used
    on purpose: a fixed fallback keeps the operation deterministic and
    input-order independent). Confidence of filled points is set to the
    threshold so downstream code treats them as usable.
    """
    filled: list[RawKeypointFrame] = []
    prev_xy: np.ndarray | None = None
    for f in frames:
        kp = f.keypoints.copy()
        low = kp[:, 2] < threshold
        if low.any():
            if prev_xy is None:
                kp[low, 0] = _CENTER_XY[0]
                kp[low, 1] = _CENTER_XY[1]
            else:
                kp[low, :2] = prev_xy[low]
            kp[low, 2] = threshold
        prev_xy = kp[:, :2].copy()
        filled.append(
            RawKeypointFrame(f.client_id, f.recording_id, f.frame_index, f.label, kp)
        )
    return filled


def merge_facial_keypoints(raw: RawKeypointFrame) -> PoseFrame:
    """Reduce 17 COCO keypoints to the 13-joint frame.

    The head joint is the arithmetic mean of the five facial keypoints
    (nose, eyes, ears); the 12 body joints pass through in COCO order.
    """
    kp = raw.keypoints
    head = kp[list(FACIAL_KEYPOINT_INDICES), :2].mean(axis=0)
    body = kp[5:, :2]
    coords = np.concatenate([head, body.reshape(-1)])
    assert coords.shape == (FRAME_DIM,)
    return PoseFrame(coords=coords, label=raw.label)


def normalize_frame(
    frame: PoseFrame, image_width: float, image_height: float
) -> PoseFrame:
    """Scale pixel coordinates into [0, 1], clamping out-of-image points."""
    if image_width <= 0 or image_height <= 0:
        raise ConfigError(
            f"image dimensions must be positive, got {image_width}x{image_height}"
        )
    coords = frame.coords.reshape(-1, 2) / np.array([image_width, image_height])
    coords = np.clip(coords, 0.0, 1.0)
    return PoseFrame(coords=coords.reshape(-1), label=frame.label)


def label_runs(frames: list[PoseFrame]) -> list[list[PoseFrame]]:
    """Split a recording into maximal runs of identical labels."""
    runs: list[list[PoseFrame]] = []
    for f in frames:
        if runs and runs[-1][-1].label == f.label:
            runs[-1].append(f)
        else:
            runs.append([f])
    return runs


def slide_windows(
    frames: list[PoseFrame], client_id: str, recording_id: str
) -> list[WindowSample]:
    """Emit stride-1 windows of 20 frames, never straddling a label change.

    A run of F same-label frames yields max(0, F - 19) windows, each
    inheriting the run's label.
    """
    windows: list[WindowSample] = []
    offset = 0
    for run in label_runs(frames):
        coords = np.stack([f.coords for f in run])
        for start in range(len(run) - WINDOW_LEN + 1):
            abs_start = offset + start
            windows.append(
                WindowSample(
                    coords=coords[start : start + WINDOW_LEN],
                    label=run[0].label,
                    client_id=client_id,
                    uid=f"{client_id}/{recording_id}/{abs_start}",
                )
            )
        offset += len(run)
    return windows


def recording_to_windows(
    frames: list[RawKeypointFrame],
    image_width: float,
    image_height: float,
) -> list[WindowSample]:
    """Full per-recording pipeline: fill, merge, normalize, window."""
    if not frames:
        return []
    frames = sorted(frames, key=lambda f: f.frame_index)
    pose_frames = [
        normalize_frame(merge_facial_keypoints(f), image_width, image_height)
        for f in fill_low_confidence(frames)
    ]
    return slide_windows(pose_frames, frames[0].client_id, frames[0].recording_id)
