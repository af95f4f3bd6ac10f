"""Synthetic multi-subject gesture recordings.

Generates COCO-17 keypoint streams whose eight gesture classes are
separable but deliberately heterogeneous across subjects: each subject
performs a class with a personally fixed movement variant (acting arm),
personal amplitude/phase/speed, a personal body placement, and skewed
per-class segment lengths. Single-subject models therefore overfit that
subject's style while pooled training can learn every variant, which is
exactly the non-IID structure the federated experiments probe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fedpose.pose.types import GestureLabel, RawKeypointFrame
from fedpose.seeding import derive_rng

# Neutral standing skeleton on a 640x480 canvas, COCO-17 order.
_BASE_SKELETON = np.array(
    [
        (320.0, 118.0),  # nose
        (312.0, 112.0),  # left_eye
        (328.0, 112.0),  # right_eye
        (305.0, 120.0),  # left_ear
        (335.0, 120.0),  # right_ear
        (270.0, 180.0),  # left_shoulder
        (370.0, 180.0),  # right_shoulder
        (250.0, 250.0),  # left_elbow
        (390.0, 250.0),  # right_elbow
        (240.0, 320.0),  # left_wrist
        (400.0, 320.0),  # right_wrist
        (290.0, 330.0),  # left_hip
        (350.0, 330.0),  # right_hip
        (285.0, 400.0),  # left_knee
        (355.0, 400.0),  # right_knee
        (283.0, 460.0),  # left_ankle
        (357.0, 460.0),  # right_ankle
    ]
)
_L_ELBOW, _R_ELBOW, _L_WRIST, _R_WRIST = 7, 8, 9, 10
_CHEST = np.array([320.0, 240.0])
_BODY_CENTER = np.array([320.0, 300.0])

# Movement variants: which arm carries the gesture.
_VARIANTS = ("left", "right", "both")


@dataclass
class SyntheticSpec:
    """Size and style knobs for the generator."""

    subjects: int = 5
    recordings_per_subject: int = 1
    frames_per_recording: int = 100
    image_width: float = 640.0
    image_height: float = 480.0
    base_segment_len: int = 30
    noise_px: float = 2.0
    low_confidence_rate: float = 0.01
    client_prefix: str = "c"
    first_subject_index: int = 1

    def client_ids(self) -> list[str]:
        start = self.first_subject_index
        return [f"{self.client_prefix}{i}" for i in range(start, start + self.subjects)]


@dataclass
class _SubjectStyle:
    amplitude: float
    phase: float
    speed: float
    center: np.ndarray
    limb_scale: float
    variants: dict[int, str]  # class index -> acting arm
    segment_len: dict[int, int]  # class index -> frames per segment


def _subject_style(seed: int, subject_index: int, base_segment_len: int) -> _SubjectStyle:
    rng = derive_rng(seed, "style", subject_index)
    variants = {c: _VARIANTS[rng.integers(0, len(_VARIANTS))] for c in range(8)}
    segment_len = {
        c: base_segment_len + int(rng.integers(-6, 13)) for c in range(8)
    }
    return _SubjectStyle(
        amplitude=float(rng.uniform(0.7, 1.3)),
        phase=float(rng.uniform(0.0, 2.0 * np.pi)),
        speed=float(rng.uniform(0.8, 1.25)),
        center=np.array([rng.uniform(-40.0, 40.0), rng.uniform(-25.0, 25.0)]),
        limb_scale=float(rng.uniform(0.88, 1.12)),
        variants=variants,
        segment_len=segment_len,
    )


def _arm_joints(arm: str) -> list[tuple[int, float]]:
    """(joint index, displacement share) pairs for the acting arm(s)."""
    left = [(_L_WRIST, 1.0), (_L_ELBOW, 0.5)]
    right = [(_R_WRIST, 1.0), (_R_ELBOW, 0.5)]
    if arm == "left":
        return left
    if arm == "right":
        return right
    return left + right


def _gesture_displacement(
    cls: int, arm: str, skeleton: np.ndarray, hold: float, wave: float, amplitude: float
) -> np.ndarray:
    """Displacement field (17, 2) for one gesture class at one instant.

    `hold` ramps 0 -> 1 at segment start and then stays; `wave` is a small
    oscillation riding on the held posture so windows anywhere in the
    segment carry both a postural and a temporal signature.
    """
    disp = np.zeros_like(skeleton)
    label = GestureLabel(cls)
    if label is GestureLabel.nothing:
        return disp

    reach = amplitude * hold
    for joint, share in _arm_joints(arm):
        wx, wy = 0.0, 0.0
        if label is GestureLabel.up:
            wy = -120.0 * reach + 8.0 * wave
        elif label is GestureLabel.down:
            wy = 90.0 * reach + 8.0 * wave
        elif label is GestureLabel.left:
            wx = -110.0 * reach + 9.0 * wave
        elif label is GestureLabel.right:
            wx = 110.0 * reach + 9.0 * wave
        elif label in (GestureLabel.grab, GestureLabel.ungrab):
            toward = _CHEST - skeleton[joint]
            sign = 0.75 if label is GestureLabel.grab else -0.55
            wx, wy = sign * reach * toward + 6.0 * wave
        elif label is GestureLabel.stop:
            # Arm raised beside the shoulder and held with a slight tremor.
            shoulder = skeleton[joint - 2]
            target = shoulder + np.array([0.0, -130.0])
            wx, wy = reach * (target - skeleton[joint]) + 3.0 * wave
        disp[joint] += share * np.array([wx, wy])
    return disp


# Oscillation frequency per class family adds a temporal texture.
_CLASS_FREQ = {0: 2.0, 1: 1.2, 2: 1.6, 3: 0.0, 4: 1.6, 5: 0.9, 6: 1.2, 7: 2.0}


def synthesize_dataset(spec: SyntheticSpec, seed: int) -> list[RawKeypointFrame]:
    """Emit deterministic RawKeypointFrames for the whole synthetic cohort.

    Recordings are concatenations of single-gesture segments; the class
    sequence is staggered across subjects and recordings so a handful of
    segments already covers all eight classes cohort-wide.
    """
    frames: list[RawKeypointFrame] = []
    for s, client_id in enumerate(spec.client_ids()):
        style = _subject_style(seed, s, spec.base_segment_len)
        for r in range(spec.recordings_per_subject):
            frames.extend(_synthesize_recording(spec, seed, s, r, client_id, style))
    return frames


def _synthesize_recording(
    spec: SyntheticSpec,
    seed: int,
    subject_index: int,
    recording_index: int,
    client_id: str,
    style: _SubjectStyle,
) -> list[RawKeypointFrame]:
    noise_rng = derive_rng(seed, "noise", subject_index, recording_index)
    conf_rng = derive_rng(seed, "confidence", subject_index, recording_index)
    recording_id = f"r{recording_index}"

    skeleton = _BODY_CENTER + style.limb_scale * (_BASE_SKELETON - _BODY_CENTER)
    skeleton = skeleton + style.center

    out: list[RawKeypointFrame] = []
    frame_index = 0
    segment = 0
    cls = (3 * subject_index + 5 * recording_index) % 8
    total = spec.frames_per_recording
    while frame_index < total:
        seg_len = min(style.segment_len[cls], total - frame_index)
        freq = _CLASS_FREQ[cls] * style.speed
        for i in range(seg_len):
            tau = i / max(1, style.segment_len[cls] - 1)
            hold = min(1.0, tau / 0.15) if tau < 0.15 else 1.0
            wave = np.sin(2.0 * np.pi * freq * tau + style.phase)
            sway = 3.0 * np.sin(2.0 * np.pi * 0.5 * style.speed * tau + style.phase)
            disp = _gesture_displacement(
                cls, style.variants[cls], skeleton, hold, wave, style.amplitude
            )
            xy = skeleton + disp
            xy = xy + np.array([0.6 * sway, sway])
            xy = xy + noise_rng.normal(0.0, spec.noise_px, size=xy.shape)
            # detectors report in-frame coordinates only
            xy[:, 0] = np.clip(xy[:, 0], 0.0, spec.image_width)
            xy[:, 1] = np.clip(xy[:, 1], 0.0, spec.image_height)

            conf = conf_rng.uniform(0.85, 0.99, size=17)
            dropout = conf_rng.uniform(size=17) < spec.low_confidence_rate
            conf[dropout] = 0.01

            out.append(
                RawKeypointFrame(
                    client_id=client_id,
                    recording_id=recording_id,
                    frame_index=frame_index,
                    label=GestureLabel(cls),
                    keypoints=np.column_stack([xy, conf]),
                )
            )
            frame_index += 1
        segment += 1
        cls = (cls + 1) % 8
    return out
