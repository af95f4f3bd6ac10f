"""JSON-lines I/O for raw keypoint frames and processed windows.

Raw frame lines:
    {"client": "c1", "recording": "r3", "frame": 17, "label": "grab",
     "kp": [[x, y, c], ... 17 triples in COCO order]}

Processed window lines:
    {"client": "c1", "label": "grab", "coords": [520 reals, frame-major]}

Both formats are plain UTF-8 with LF endings so any implementation can
cross-check them.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from fedpose.errors import DataFormatError
from fedpose.pose.types import (
    FRAME_DIM,
    WINDOW_LEN,
    GestureLabel,
    RawKeypointFrame,
    WindowSample,
)


def load_frames(path) -> list[RawKeypointFrame]:
    """Parse a raw-frames JSONL file; errors carry the offending line number."""
    frames: list[RawKeypointFrame] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"invalid JSON ({exc.msg})", line=lineno) from None
            try:
                frames.append(
                    RawKeypointFrame(
                        client_id=str(obj["client"]),
                        recording_id=str(obj["recording"]),
                        frame_index=int(obj["frame"]),
                        label=GestureLabel.from_name(obj["label"]),
                        keypoints=np.asarray(obj["kp"], dtype=np.float64),
                    )
                )
            except (KeyError, TypeError, ValueError, DataFormatError) as exc:
                raise DataFormatError(str(exc), line=lineno) from None
    return frames


def save_frames(frames: list[RawKeypointFrame], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for f in frames:
            fh.write(
                json.dumps(
                    {
                        "client": f.client_id,
                        "recording": f.recording_id,
                        "frame": f.frame_index,
                        "label": f.label.name,
                        "kp": f.keypoints.tolist(),
                    }
                )
            )
            fh.write("\n")


def save_windows(windows: list[WindowSample], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for w in windows:
            fh.write(
                json.dumps(
                    {
                        "client": w.client_id,
                        "label": w.label.name,
                        "coords": w.coords.reshape(-1).tolist(),
                    }
                )
            )
            fh.write("\n")


def load_windows(path) -> list[WindowSample]:
    """Parse a processed-windows JSONL file.

    Loaded windows are assigned line-based uids (the portable format
    intentionally carries no identity beyond content).
    """
    windows: list[WindowSample] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"invalid JSON ({exc.msg})", line=lineno) from None
            try:
                coords = np.asarray(obj["coords"], dtype=np.float64)
                if coords.shape != (WINDOW_LEN * FRAME_DIM,):
                    raise DataFormatError(
                        f"expected {WINDOW_LEN * FRAME_DIM} coords, got {coords.size}"
                    )
                client = str(obj["client"])
                windows.append(
                    WindowSample(
                        coords=coords.reshape(WINDOW_LEN, FRAME_DIM),
                        label=GestureLabel.from_name(obj["label"]),
                        client_id=client,
                        uid=f"{client}/line{lineno}",
                    )
                )
            except (KeyError, TypeError, ValueError, DataFormatError) as exc:
                raise DataFormatError(str(exc), line=lineno) from None
    return windows
