"""Stream structuring: frames, windowing, labels, persistence."""

import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from amtransfer.errors import LabelingError, ValidationError
from amtransfer.structuring import (
    WINDOW_LENGTH,
    AnomalyKind,
    BuildDataset,
    Frame,
    FrameLabel,
    WindowSet,
    filter_inactive,
    load_dataset,
    make_concatenations,
    save_dataset,
    split_normal_anomalous,
)

from conftest import make_frames


def frame_at(t, label=FrameLabel.NORMAL, kinds=(), value=0.5, hw=(4, 4)):
    return Frame(
        pixels=np.full(hw, value),
        layer_index=0,
        control_index=0,
        time_index=t,
        label=label,
        anomaly_kinds=kinds,
    )


class TestFrame:
    def test_pixels_must_be_2d(self):
        with pytest.raises(ValidationError):
            frame_at(0, hw=(4, 4, 1))

    def test_indices_must_be_non_negative(self):
        with pytest.raises(ValidationError):
            Frame(pixels=np.zeros((4, 4)), layer_index=-1, control_index=0, time_index=0)

    def test_anomaly_kinds_only_on_anomalous(self):
        with pytest.raises(ValidationError):
            frame_at(0, label=FrameLabel.NORMAL, kinds=(AnomalyKind.SPATTER,))

    def test_anomalous_without_named_kind_is_allowed(self):
        # real-image sidecars may flag a frame without classifying the defect
        f = frame_at(0, label=FrameLabel.ANOMALOUS)
        assert f.anomaly_kinds == ()

    def test_position_tuple(self):
        f = frame_at(7)
        assert f.position == (0, 0, 7)


class TestBuildDataset:
    def test_requires_strictly_increasing_order(self):
        frames = [frame_at(0), frame_at(2), frame_at(1)]
        with pytest.raises(ValidationError, match="order"):
            BuildDataset.from_frames(frames)

    def test_requires_uniform_shape(self):
        frames = [frame_at(0), frame_at(1, hw=(8, 8))]
        with pytest.raises(ValidationError):
            BuildDataset.from_frames(frames)

    def test_bounds_checked(self):
        frames = [frame_at(0), frame_at(1)]
        with pytest.raises(ValidationError):
            BuildDataset.from_frames(frames, bounds=(1, 1, 1))

    def test_label_counts(self):
        frames = [
            frame_at(0),
            frame_at(1, FrameLabel.ANOMALOUS, (AnomalyKind.PLUME,)),
            frame_at(2, FrameLabel.UNLABELED),
        ]
        ds = BuildDataset.from_frames(frames)
        assert ds.label_counts() == {"normal": 1, "anomalous": 1, "unlabeled": 1}


class TestFilterInactive:
    def test_drops_dim_frames(self):
        frames = [frame_at(0, value=0.5), frame_at(1, value=0.001), frame_at(2, value=0.5)]
        kept = filter_inactive(frames, mean_threshold=0.02)
        assert [f.time_index for f in kept] == [0, 2]

    def test_threshold_is_inclusive_keep(self):
        frames = [frame_at(0, value=0.02)]
        assert len(filter_inactive(frames, mean_threshold=0.02)) == 1


class TestMakeConcatenations:
    def test_default_window_length(self):
        assert WINDOW_LENGTH == 4

    def test_count_matches_formula(self):
        frames = make_frames(10)
        assert len(make_concatenations(frames, window=4, stride=1)) == 7
        assert len(make_concatenations(frames, window=4, stride=2)) == 4
        assert len(make_concatenations(frames, window=4, stride=3)) == 3

    @settings(max_examples=50, deadline=None)
    @given(n=st.integers(4, 40), window=st.integers(1, 6), stride=st.integers(1, 5))
    def test_count_formula_property(self, n, window, stride):
        frames = make_frames(n, hw=(4, 4))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            concats = make_concatenations(frames, window=window, stride=stride)
        expected = (n - window) // stride + 1 if n >= window else 0
        assert len(concats) == expected

    def test_short_stream_warns_and_returns_empty(self):
        frames = make_frames(3)
        with pytest.warns(UserWarning, match="window length"):
            assert make_concatenations(frames, window=4) == []

    def test_pixels_are_stacked_in_time_order(self):
        frames = [frame_at(t, value=t / 10) for t in range(4)]
        (concat,) = make_concatenations(frames, window=4)
        assert concat.pixels.shape == (4, 4, 4)
        assert np.allclose(concat.pixels[:, 0, 0], [0.0, 0.1, 0.2, 0.3])
        assert concat.start_index == 0

    def test_any_anomalous_frame_taints_the_window(self):
        frames = [
            frame_at(0),
            frame_at(1, FrameLabel.ANOMALOUS, (AnomalyKind.SPATTER,)),
            frame_at(2),
            frame_at(3),
        ]
        (concat,) = make_concatenations(frames, window=4)
        assert concat.label == FrameLabel.ANOMALOUS
        assert concat.anomaly_kinds == (AnomalyKind.SPATTER,)

    def test_unlabeled_beats_normal_but_not_anomalous(self):
        frames = [frame_at(0), frame_at(1, FrameLabel.UNLABELED), frame_at(2), frame_at(3)]
        (concat,) = make_concatenations(frames, window=4)
        assert concat.label == FrameLabel.UNLABELED

        frames[2] = frame_at(2, FrameLabel.ANOMALOUS, (AnomalyKind.NOISE,))
        (concat,) = make_concatenations(frames, window=4)
        assert concat.label == FrameLabel.ANOMALOUS


class TestSplit:
    def test_split_normal_anomalous(self):
        frames = make_frames(10, anomalous_at=(5,))
        concats = make_concatenations(frames, window=4)
        normal, anomalous = split_normal_anomalous(concats)
        assert len(normal) + len(anomalous) == len(concats)
        assert all(c.label == FrameLabel.NORMAL for c in normal)
        assert all(c.label == FrameLabel.ANOMALOUS for c in anomalous)

    def test_unlabeled_windows_are_rejected(self):
        frames = [frame_at(0), frame_at(1, FrameLabel.UNLABELED), frame_at(2), frame_at(3)]
        concats = make_concatenations(frames, window=4)
        with pytest.raises(LabelingError):
            split_normal_anomalous(concats)


class TestDatasetPersistence:
    def test_png_round_trip(self, tmp_path):
        frames = make_frames(6, anomalous_at=(2,), seed=3)
        ds = BuildDataset.from_frames(frames, process_tag="synth:test")
        save_dataset(ds, tmp_path / "ds")
        loaded = load_dataset(tmp_path / "ds")
        assert loaded.process_tag == "synth:test"
        assert len(loaded.frames) == len(ds.frames)
        for a, b in zip(loaded.frames, ds.frames):
            assert a.position == b.position
            assert a.label == b.label
            assert a.anomaly_kinds == b.anomaly_kinds
            # 16-bit quantization bounds the round-trip error
            assert np.max(np.abs(a.pixels - b.pixels)) <= 1.0 / 65535

    def test_missing_manifest_errors(self, tmp_path):
        (tmp_path / "empty").mkdir()
        with pytest.raises(ValidationError):
            load_dataset(tmp_path / "empty")


class TestWindowSet:
    def test_round_trip_through_concatenations(self):
        frames = make_frames(12, anomalous_at=(6,))
        concats = make_concatenations(frames, window=4)
        ws = WindowSet.from_concatenations(concats, process_tag="t")
        back = ws.to_concatenations()
        assert len(back) == len(concats)
        for a, b in zip(back, concats):
            assert np.array_equal(a.pixels, b.pixels)
            assert a.label == b.label
            assert a.start_index == b.start_index

    def test_indices_partition(self):
        frames = make_frames(12, anomalous_at=(6,))
        ws = WindowSet.from_concatenations(make_concatenations(frames, window=4))
        normal = ws.normal_indices()
        anomalous = ws.anomalous_indices()
        assert sorted(normal + anomalous) == list(range(len(ws)))
        assert len(anomalous) == 4  # frame 6 taints windows starting at 3..6

    def test_subset_preserves_starts(self):
        frames = make_frames(12)
        ws = WindowSet.from_concatenations(make_concatenations(frames, window=4))
        sub = ws.subset([0, 2, 5])
        assert list(sub.start_indices) == [0, 2, 5]
        assert np.array_equal(sub.pixels[1], ws.pixels[2])

    def test_npz_round_trip_is_exact(self, tmp_path):
        frames = make_frames(10, anomalous_at=(4,), seed=7)
        ws = WindowSet.from_concatenations(
            make_concatenations(frames, window=4), process_tag="proc"
        )
        path = tmp_path / "w.npz"
        ws.save(path)
        loaded = WindowSet.load(path)
        # stored as float32; the round trip is exact at that resolution
        assert np.array_equal(
            loaded.pixels, ws.pixels.astype(np.float32).astype(np.float64)
        )
        assert list(loaded.labels) == list(ws.labels)
        assert list(loaded.start_indices) == list(ws.start_indices)
        assert loaded.process_tag == "proc"
