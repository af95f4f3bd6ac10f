import numpy as np
import pytest

from fedpose.pose.preprocess import recording_to_windows
from fedpose.pose.splits import stratified_split
from fedpose.pose.synthetic import SyntheticSpec, synthesize_dataset


def windows_for(spec: SyntheticSpec, seed: int = 0):
    frames = synthesize_dataset(spec, seed)
    by_rec = {}
    for f in frames:
        by_rec.setdefault((f.client_id, f.recording_id), []).append(f)
    windows = []
    for key in sorted(by_rec):
        windows.extend(
            recording_to_windows(by_rec[key], spec.image_width, spec.image_height)
        )
    return windows


def group_by_client(windows):
    groups = {}
    for w in windows:
        groups.setdefault(w.client_id, []).append(w)
    return {cid: groups[cid] for cid in sorted(groups)}


@pytest.fixture(scope="session")
def small_spec():
    return SyntheticSpec(subjects=5, recordings_per_subject=1, frames_per_recording=400)


@pytest.fixture(scope="session")
def small_windows(small_spec):
    return windows_for(small_spec, seed=0)


@pytest.fixture(scope="session")
def small_clients(small_windows):
    groups = group_by_client(small_windows)
    return [stratified_split(ws, cid, 0) for cid, ws in groups.items()]


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
