"""Real-image ingest: loading, preprocessing chain, sidecar labels, augmentation."""

import json

import numpy as np
import pytest
from PIL import Image

from amtransfer.errors import IngestError, ValidationError
from amtransfer.ingest import (
    LUMA_WEIGHTS,
    Augmentation,
    AugmentationKind,
    IngestSpec,
    apply_augmentations,
    ingest,
)
from amtransfer.structuring import AnomalyKind, FrameLabel


def write_gray_png(path, array_u8):
    Image.fromarray(array_u8.astype(np.uint8), mode="L").save(path)


def write_rgb_png(path, array_u8):
    Image.fromarray(array_u8.astype(np.uint8), mode="RGB").save(path)


@pytest.fixture
def image_dir(tmp_path):
    rng = np.random.default_rng(0)
    directory = tmp_path / "frames"
    directory.mkdir()
    for n in range(6):
        write_gray_png(directory / f"frame_{n:03d}.png", rng.integers(0, 256, (16, 16)))
    return directory


class TestOrdering:
    def test_orders_by_filename(self, image_dir):
        ds = ingest(IngestSpec(source_dir=image_dir))
        assert [f.time_index for f in ds.frames] == list(range(6))
        assert ds.frames[0].provenance == "ingest:frame_000.png"

    def test_missing_directory(self, tmp_path):
        with pytest.raises(IngestError, match="does not exist"):
            ingest(IngestSpec(source_dir=tmp_path / "nope"))

    def test_empty_directory(self, tmp_path):
        (tmp_path / "empty").mkdir()
        with pytest.raises(IngestError, match="no image files"):
            ingest(IngestSpec(source_dir=tmp_path / "empty"))


class TestPreprocessing:
    def test_grayscale_uses_luma_weights(self, tmp_path):
        directory = tmp_path / "rgb"
        directory.mkdir()
        rgb = np.zeros((8, 8, 3))
        rgb[..., 0] = 100
        rgb[..., 1] = 150
        rgb[..., 2] = 200
        write_rgb_png(directory / "a.png", rgb)
        ds = ingest(IngestSpec(source_dir=directory))
        expected = (100 * LUMA_WEIGHTS[0] + 150 * LUMA_WEIGHTS[1] + 200 * LUMA_WEIGHTS[2]) / 255
        assert np.allclose(ds.frames[0].pixels, expected)

    def test_multichannel_without_grayscale_errors(self, tmp_path):
        directory = tmp_path / "rgb"
        directory.mkdir()
        write_rgb_png(directory / "a.png", np.zeros((8, 8, 3)))
        with pytest.raises(IngestError, match="multi-channel"):
            ingest(IngestSpec(source_dir=directory, to_grayscale=False))

    def test_roi_crop_indexing(self, tmp_path):
        directory = tmp_path / "roi"
        directory.mkdir()
        arr = np.arange(16 * 16).reshape(16, 16) % 256
        write_gray_png(directory / "a.png", arr)
        ds = ingest(IngestSpec(source_dir=directory, roi=(2, 3, 5, 4), normalize=False))
        # roi is (x, y, w, h): rows y..y+h, columns x..x+w
        assert ds.frames[0].pixels.shape == (4, 5)
        assert np.array_equal(ds.frames[0].pixels, arr[3:7, 2:7].astype(float))

    def test_roi_outside_image_errors(self, tmp_path):
        directory = tmp_path / "roi"
        directory.mkdir()
        write_gray_png(directory / "a.png", np.zeros((8, 8)))
        with pytest.raises(ValidationError, match="roi"):
            ingest(IngestSpec(source_dir=directory, roi=(6, 6, 5, 5)))

    def test_resize_to_target(self, image_dir):
        ds = ingest(IngestSpec(source_dir=image_dir, resize_to=(8, 8)))
        assert ds.frame_shape == (8, 8)

    def test_resize_must_be_divisible_by_four(self, image_dir):
        with pytest.raises(ValidationError, match="divisible by 4"):
            IngestSpec(source_dir=image_dir, resize_to=(10, 10))

    def test_eight_bit_normalization(self, tmp_path):
        directory = tmp_path / "n8"
        directory.mkdir()
        write_gray_png(directory / "a.png", np.full((8, 8), 255))
        ds = ingest(IngestSpec(source_dir=directory))
        assert np.allclose(ds.frames[0].pixels, 1.0)

    def test_sixteen_bit_normalization(self, tmp_path):
        directory = tmp_path / "n16"
        directory.mkdir()
        Image.fromarray(np.full((8, 8), 65535, dtype=np.uint16)).save(directory / "a.png")
        ds = ingest(IngestSpec(source_dir=directory))
        assert np.allclose(ds.frames[0].pixels, 1.0)

    def test_constant_image_survives_normalization(self, tmp_path):
        # global scaling, not per-frame min-max: a constant frame stays constant
        directory = tmp_path / "const"
        directory.mkdir()
        write_gray_png(directory / "a.png", np.full((8, 8), 51))
        ds = ingest(IngestSpec(source_dir=directory))
        assert np.allclose(ds.frames[0].pixels, 51 / 255)


class TestSidecarLabels:
    def test_labels_applied_and_rest_unlabeled(self, image_dir):
        (image_dir / "labels.json").write_text(
            json.dumps(
                {
                    "frame_000.png": {"label": "normal"},
                    "frame_001.png": {
                        "label": "anomalous",
                        "anomaly_kinds": ["spatter"],
                    },
                }
            )
        )
        ds = ingest(IngestSpec(source_dir=image_dir))
        assert ds.frames[0].label == FrameLabel.NORMAL
        assert ds.frames[1].label == FrameLabel.ANOMALOUS
        assert ds.frames[1].anomaly_kinds == (AnomalyKind.SPATTER,)
        assert all(f.label == FrameLabel.UNLABELED for f in ds.frames[2:])


class TestAugmentations:
    def test_tag_strings(self):
        assert Augmentation(AugmentationKind.ROTATION, 90).tag == "rot90"
        assert Augmentation(AugmentationKind.SCALE, 1.5).tag == "scale1.5"

    def test_scale_must_be_positive(self):
        with pytest.raises(ValidationError):
            Augmentation(AugmentationKind.SCALE, 0.0)

    def test_cardinality_with_two_augmentations(self, image_dir):
        ds = ingest(IngestSpec(source_dir=image_dir))
        out = apply_augmentations(
            ds,
            [
                Augmentation(AugmentationKind.ROTATION, 90),
                Augmentation(AugmentationKind.SCALE, 1.5),
            ],
        )
        assert len(out.frames) == 3 * len(ds.frames)

    def test_rot90_matches_coordinate_rule(self, image_dir):
        ds = ingest(IngestSpec(source_dir=image_dir))
        out = apply_augmentations(ds, [Augmentation(AugmentationKind.ROTATION, 90)])
        original = ds.frames[0].pixels
        rotated = out.frames[len(ds.frames)].pixels
        h = original.shape[0]
        # F'(x, y) = F(y, H - 1 - x)
        for x in range(4):
            for y in range(4):
                assert rotated[x, y] == original[y, h - 1 - x]

    def test_four_quarter_turns_identity(self, image_dir):
        ds = ingest(IngestSpec(source_dir=image_dir))
        pixels = ds.frames[0].pixels
        out = pixels
        from amtransfer.ingest import _rotate

        for _ in range(4):
            out = _rotate(out, 90)
        assert np.array_equal(out, pixels)

    def test_augmented_blocks_keep_labels_and_tag_provenance(self, image_dir):
        (image_dir / "labels.json").write_text(
            json.dumps({"frame_001.png": {"label": "anomalous", "anomaly_kinds": ["plume"]}})
        )
        ds = ingest(IngestSpec(source_dir=image_dir))
        out = apply_augmentations(ds, [Augmentation(AugmentationKind.SCALE, 1.5)])
        copy = out.frames[len(ds.frames) + 1]
        assert copy.label == FrameLabel.ANOMALOUS
        assert copy.anomaly_kinds == (AnomalyKind.PLUME,)
        assert copy.provenance.endswith("+scale1.5")

    def test_scale_preserves_shape(self, image_dir):
        ds = ingest(IngestSpec(source_dir=image_dir))
        for factor in (0.5, 1.5):
            out = apply_augmentations(ds, [Augmentation(AugmentationKind.SCALE, factor)])
            assert out.frames[-1].pixels.shape == ds.frame_shape

    def test_no_augmentations_is_identity(self, image_dir):
        ds = ingest(IngestSpec(source_dir=image_dir))
        assert apply_augmentations(ds, []) is ds
