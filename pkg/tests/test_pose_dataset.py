"""Data pipeline: preprocessing, windowing, splits, partitions, JSONL I/O."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedpose.errors import ConfigError, DataFormatError, PartitionError
from fedpose.pose.io import load_frames, load_windows, save_frames, save_windows
from fedpose.pose.preprocess import (
    LOW_CONFIDENCE,
    fill_low_confidence,
    label_runs,
    merge_facial_keypoints,
    normalize_frame,
    slide_windows,
)
from fedpose.pose.splits import (
    _split_counts,
    build_fedensemble_partition,
    partition_windows,
    stratified_split,
)
from fedpose.pose.synthetic import SyntheticSpec, synthesize_dataset
from fedpose.pose.types import (
    FRAME_DIM,
    GESTURE_NAMES,
    WINDOW_LEN,
    GestureLabel,
    PoseFrame,
    RawKeypointFrame,
    WindowSample,
    class_histogram,
)
from conftest import group_by_client, windows_for


def raw_frame(frame_index=0, label=GestureLabel.down, kp=None, client="c1", rec="r0"):
    if kp is None:
        kp = np.zeros((17, 3))
        kp[:, 0] = np.linspace(10, 170, 17)
        kp[:, 1] = np.linspace(20, 180, 17)
        kp[:, 2] = 0.9
    return RawKeypointFrame(client, rec, frame_index, label, kp)


class TestGestureLabels:
    def test_canonical_order_is_alphabetical(self):
        assert GESTURE_NAMES == tuple(sorted(GESTURE_NAMES))
        assert len(GESTURE_NAMES) == 8

    def test_label_roundtrip(self):
        for i, name in enumerate(GESTURE_NAMES):
            assert int(GestureLabel.from_name(name)) == i

    def test_unknown_name_rejected(self):
        with pytest.raises(DataFormatError):
            GestureLabel.from_name("wave")


class TestPreprocess:
    def test_facial_merge_is_mean_of_first_five(self):
        kp = np.zeros((17, 3))
        kp[:5, 0] = [10, 20, 30, 40, 50]
        kp[:5, 1] = [5, 10, 15, 20, 25]
        kp[:, 2] = 1.0
        frame = merge_facial_keypoints(raw_frame(kp=kp))
        assert frame.coords[0] == pytest.approx(30.0)  # head x
        assert frame.coords[1] == pytest.approx(15.0)  # head y
        assert frame.coords.shape == (FRAME_DIM,)

    def test_body_joints_pass_through(self):
        kp = np.zeros((17, 3))
        kp[5:, 0] = np.arange(12) + 100.0
        kp[5:, 1] = np.arange(12) + 200.0
        kp[:, 2] = 1.0
        frame = merge_facial_keypoints(raw_frame(kp=kp))
        assert frame.coords[2] == pytest.approx(100.0)
        assert frame.coords[3] == pytest.approx(200.0)

    def test_normalization_clamps_to_unit_square(self):
        coords = np.array([-10.0, 100.0] + [320.0, 240.0] * 12)
        frame = PoseFrame(coords, GestureLabel.down)
        out = normalize_frame(frame, 640.0, 480.0)
        assert out.coords[0] == 0.0  # clamped
        assert out.coords[2] == pytest.approx(0.5)
        assert out.coords.min() >= 0.0 and out.coords.max() <= 1.0

    def test_normalization_rejects_bad_dims(self):
        frame = PoseFrame(np.full(FRAME_DIM, 0.5), GestureLabel.down)
        with pytest.raises(ConfigError):
            normalize_frame(frame, 0.0, 480.0)

    def test_low_confidence_uses_previous_frame(self):
        a = raw_frame(0)
        b = raw_frame(1)
        b.keypoints[7, 2] = LOW_CONFIDENCE / 2  # drop one joint
        b.keypoints[7, 0] = 999.0
        filled = fill_low_confidence([a, b])
        assert filled[1].keypoints[7, 0] == a.keypoints[7, 0]

    def test_low_confidence_first_frame_falls_back_to_center(self):
        a = raw_frame(0)
        a.keypoints[3, 2] = 0.0
        filled = fill_low_confidence([a])
        assert filled[0].keypoints[3, 0] == pytest.approx(0.5)
        assert filled[0].keypoints[3, 1] == pytest.approx(0.5)

    def test_threshold_is_exclusive(self):
        a = raw_frame(0)
        a.keypoints[3, 2] = LOW_CONFIDENCE  # exactly at threshold: kept
        kept_x = a.keypoints[3, 0]
        filled = fill_low_confidence([a])
        assert filled[0].keypoints[3, 0] == kept_x


def pose_run(label, n):
    return [
        PoseFrame(np.full(FRAME_DIM, 0.1 * (i % 7)), label) for i in range(n)
    ]


class TestWindowing:
    @pytest.mark.parametrize("frames,expected", [(20, 1), (25, 6), (19, 0)])
    def test_window_count_single_run(self, frames, expected):
        ws = slide_windows(pose_run(GestureLabel.up, frames), "c1", "r0")
        assert len(ws) == expected

    def test_windows_never_straddle_label_changes(self):
        frames = pose_run(GestureLabel.up, 30) + pose_run(GestureLabel.down, 30)
        ws = slide_windows(frames, "c1", "r0")
        assert len(ws) == 11 + 11
        labels = {int(w.label) for w in ws}
        assert labels == {int(GestureLabel.up), int(GestureLabel.down)}

    def test_total_count_matches_run_formula(self):
        runs = [3, 20, 19, 47, 21]
        frames = []
        for i, n in enumerate(runs):
            frames.extend(pose_run(GestureLabel(i % 8), n))
        expected = sum(max(0, n - (WINDOW_LEN - 1)) for n in runs)
        assert len(slide_windows(frames, "c1", "r0")) == expected

    def test_uids_are_unique(self):
        ws = slide_windows(pose_run(GestureLabel.up, 60), "c1", "r0")
        assert len({w.uid for w in ws}) == len(ws)

    @given(st.lists(st.integers(min_value=1, max_value=60), min_size=1, max_size=8))
    @settings(max_examples=50, deadline=None)
    def test_count_formula_property(self, runs):
        frames = []
        for i, n in enumerate(runs):
            frames.extend(pose_run(GestureLabel(i % 8), n))
        merged = []  # adjacent same-label runs merge, recompute expectation
        for f in frames:
            if merged and merged[-1][0] == f.label:
                merged[-1][1] += 1
            else:
                merged.append([f.label, 1])
        expected = sum(max(0, n - 19) for _, n in merged)
        assert len(slide_windows(frames, "c", "r")) == expected


def toy_windows(per_class, classes=8, client="c1"):
    out = []
    for cls in range(classes):
        for i in range(per_class):
            out.append(
                WindowSample(
                    np.full((WINDOW_LEN, FRAME_DIM), 0.5),
                    GestureLabel(cls),
                    client,
                    f"{client}/r0/{cls * 1000 + i}",
                )
            )
    return out


class TestSplits:
    @pytest.mark.parametrize("n,expected", [(100, (88, 6, 6)), (50, (44, 3, 3)), (10, (8, 1, 1))])
    def test_split_counts_examples(self, n, expected):
        assert _split_counts(n, (0.88, 0.06, 0.06)) == expected

    def test_zero_fraction_stays_zero(self):
        t, v, s = _split_counts(10, (0.94, 0.06, 0.0))
        assert s == 0 and t + v == 10

    @given(st.integers(min_value=1, max_value=500))
    @settings(max_examples=200, deadline=None)
    def test_split_counts_partition_property(self, n):
        t, v, s = _split_counts(n, (0.88, 0.06, 0.06))
        assert t + v + s == n
        assert min(t, v, s) >= 0
        # each non-train part within one sample of its target
        assert abs(v - 0.06 * n) <= 1.0 + 1e-9
        assert abs(s - 0.06 * n) <= 1.0 + 1e-9

    def test_stratified_split_is_disjoint_and_complete(self):
        ws = toy_windows(13)
        ds = stratified_split(ws, "c1", 0)
        ids = [w.uid for w in ds.train + ds.val + ds.test]
        assert sorted(ids) == sorted(w.uid for w in ws)
        assert len(set(ids)) == len(ws)

    def test_stratified_split_is_per_class(self):
        # 20 per class: floors 17/1/1, remainder tops up train -> 18/1/1
        ds = stratified_split(toy_windows(20), "c1", 0)
        for part, expect in ((ds.train, 18), (ds.val, 1), (ds.test, 1)):
            assert (class_histogram(part) == expect).all()

    def test_split_deterministic(self):
        a = stratified_split(toy_windows(10), "c1", 7)
        b = stratified_split(toy_windows(10), "c1", 7)
        assert [w.uid for w in a.train] == [w.uid for w in b.train]
        assert [w.uid for w in a.test] == [w.uid for w in b.test]

    def test_split_depends_on_seed(self):
        a = stratified_split(toy_windows(30), "c1", 0)
        b = stratified_split(toy_windows(30), "c1", 1)
        assert [w.uid for w in a.train] != [w.uid for w in b.train]


class TestFedEnsemblePartition:
    def mixed_windows(self, per_client=60):
        out = []
        for c in range(5):
            out.extend(toy_windows(per_client // 8 + 1, client=f"c{c + 1}")[:per_client])
        return out

    def test_sizes_within_one(self):
        ws = self.mixed_windows()
        plan = build_fedensemble_partition(ws, 5, 0)
        parts = partition_windows(ws, plan)
        sizes = [len(p) for p in parts]
        assert max(sizes) - min(sizes) <= 1
        assert sum(sizes) == len(ws)

    def test_every_partition_mixes_subjects(self):
        parts = partition_windows(
            self.mixed_windows(), build_fedensemble_partition(self.mixed_windows(), 5, 0)
        )
        for p in parts:
            assert len({w.client_id for w in p}) >= 3

    def test_partition_deterministic(self):
        ws = self.mixed_windows()
        a = build_fedensemble_partition(ws, 5, 3)
        b = build_fedensemble_partition(ws, 5, 3)
        assert a.assignments == b.assignments

    def test_k1_rejected_by_partitioner(self):
        with pytest.raises(ConfigError):
            build_fedensemble_partition(self.mixed_windows(), 1, 0)

    def test_single_subject_cannot_mix(self):
        ws = toy_windows(10, client="solo")
        with pytest.raises(PartitionError):
            build_fedensemble_partition(ws, 2, 0)


class TestSynthetic:
    def test_deterministic(self, small_spec):
        a = synthesize_dataset(small_spec, 0)
        b = synthesize_dataset(small_spec, 0)
        assert len(a) == len(b)
        assert all(np.array_equal(x.keypoints, y.keypoints) for x, y in zip(a, b))

    def test_all_clients_and_classes_present(self, small_windows):
        groups = group_by_client(small_windows)
        assert sorted(groups) == [f"c{i}" for i in range(1, 6)]
        for ws in groups.values():
            assert (class_histogram(ws) > 0).all()

    def test_confidences_mostly_high(self, small_spec):
        frames = synthesize_dataset(small_spec, 0)
        conf = np.concatenate([f.keypoints[:, 2] for f in frames])
        assert (conf < LOW_CONFIDENCE).mean() < 0.05

    def test_keypoints_inside_canvas(self, small_spec):
        frames = synthesize_dataset(small_spec, 0)
        xy = np.stack([f.keypoints[:, :2] for f in frames])
        assert xy[..., 0].max() <= small_spec.image_width
        assert xy[..., 1].max() <= small_spec.image_height


class TestIO:
    def test_frames_roundtrip(self, tmp_path, small_spec):
        frames = synthesize_dataset(
            SyntheticSpec(subjects=2, frames_per_recording=40), 0
        )
        path = tmp_path / "raw.jsonl"
        save_frames(frames, path)
        loaded = load_frames(path)
        assert len(loaded) == len(frames)
        for a, b in zip(frames, loaded):
            assert a.client_id == b.client_id and a.frame_index == b.frame_index
            np.testing.assert_array_equal(a.keypoints, b.keypoints)

    def test_windows_roundtrip_value_exact(self, tmp_path):
        ws = toy_windows(3)
        ws[0].coords[5, 7] = 1 / 3  # not representable in short decimal
        path = tmp_path / "win.jsonl"
        save_windows(ws, path)
        loaded = load_windows(path)
        assert len(loaded) == len(ws)
        np.testing.assert_array_equal(loaded[0].coords, ws[0].coords)
        assert [int(w.label) for w in loaded] == [int(w.label) for w in ws]

    def test_bad_line_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"client": "c1"}\n', encoding="utf-8")
        with pytest.raises(DataFormatError) as err:
            load_windows(path)
        assert "line 1" in str(err.value)

    def test_malformed_json_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text("not json\n", encoding="utf-8")
        with pytest.raises(DataFormatError):
            load_frames(path)

    def test_raw_format_shape(self, tmp_path):
        frames = synthesize_dataset(SyntheticSpec(subjects=1, frames_per_recording=25), 0)
        path = tmp_path / "raw.jsonl"
        save_frames(frames, path)
        row = json.loads(path.read_text().splitlines()[0])
        assert set(row) == {"client", "recording", "frame", "label", "kp"}
        assert len(row["kp"]) == 17 and len(row["kp"][0]) == 3

    def test_window_format_shape(self, tmp_path):
        path = tmp_path / "win.jsonl"
        save_windows(toy_windows(1), path)
        row = json.loads(path.read_text().splitlines()[0])
        assert set(row) == {"client", "label", "coords"}
        assert len(row["coords"]) == WINDOW_LEN * FRAME_DIM
