"""Checkpoint container: round trips, reproducible bytes, corruption handling."""

import numpy as np
import pytest

from amtransfer.errors import ValidationError
from amtransfer.nn.checkpoint import (
    FORMAT_VERSION,
    MAGIC,
    load_checkpoint,
    save_checkpoint,
)
from amtransfer.nn.model import AutoencoderModel
from amtransfer.nn.training import TrainingConfig, train


def trained_model(seed=0):
    model = AutoencoderModel.build(input_shape=(4, 8, 8), seed=seed)
    data = np.full((4, 4, 8, 8), 0.7)
    train(model, data, TrainingConfig(epochs=1, batch_size=4, seed=seed))
    return model


class TestRoundTrip:
    def test_parameters_and_buffers_survive(self, tmp_path):
        model = trained_model()
        path = save_checkpoint(model, tmp_path / "m.mpae")
        loaded = load_checkpoint(path)
        for (name_a, ta), (name_b, tb) in zip(
            model.named_parameters(), loaded.named_parameters()
        ):
            assert name_a == name_b
            assert np.array_equal(ta.astype(np.float32), tb.astype(np.float32))
        for (name_a, ba), (name_b, bb) in zip(
            model.named_buffers(), loaded.named_buffers()
        ):
            assert name_a == name_b
            assert np.array_equal(ba.astype(np.float32), bb.astype(np.float32))

    def test_specs_and_metadata_survive(self, tmp_path):
        model = trained_model(seed=3)
        loaded = load_checkpoint(save_checkpoint(model, tmp_path / "m.mpae"))
        assert loaded.specs == model.specs
        assert loaded.input_shape == model.input_shape
        assert loaded.training_config == model.training_config
        assert loaded.loss_history == pytest.approx(model.loss_history)

    def test_loaded_model_reproduces_outputs(self, tmp_path):
        model = trained_model(seed=1)
        loaded = load_checkpoint(save_checkpoint(model, tmp_path / "m.mpae"))
        x = np.random.default_rng(0).random((2, 4, 8, 8), dtype=np.float32)
        a = model.forward(x, training=False)
        b = loaded.forward(x, training=False)
        assert np.allclose(a, b, atol=1e-6)

    def test_double_round_trip_is_exact(self, tmp_path):
        """Float32 storage is lossy once but a fixed point afterwards."""
        model = trained_model()
        first = load_checkpoint(save_checkpoint(model, tmp_path / "a.mpae"))
        second = load_checkpoint(save_checkpoint(first, tmp_path / "b.mpae"))
        for (_, ta), (_, tb) in zip(
            first.named_parameters(), second.named_parameters()
        ):
            assert np.array_equal(ta, tb)


class TestReproducibleBytes:
    def test_same_model_saves_byte_identical(self, tmp_path):
        model = trained_model()
        p1 = save_checkpoint(model, tmp_path / "a.mpae")
        p2 = save_checkpoint(model, tmp_path / "b.mpae")
        assert p1.read_bytes() == p2.read_bytes()

    def test_header_layout(self, tmp_path):
        path = save_checkpoint(trained_model(), tmp_path / "m.mpae")
        data = path.read_bytes()
        assert data[:4] == MAGIC
        assert int(np.frombuffer(data[4:8], dtype="<u4")[0]) == FORMAT_VERSION


class TestCorruption:
    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.mpae"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(ValidationError, match="magic"):
            load_checkpoint(path)

    def test_unknown_version(self, tmp_path):
        good = save_checkpoint(trained_model(), tmp_path / "m.mpae").read_bytes()
        bumped = good[:4] + np.uint32(99).tobytes() + good[8:]
        path = tmp_path / "v99.mpae"
        path.write_bytes(bumped)
        with pytest.raises(ValidationError, match="version"):
            load_checkpoint(path)

    def test_truncated_blob(self, tmp_path):
        good = save_checkpoint(trained_model(), tmp_path / "m.mpae").read_bytes()
        path = tmp_path / "cut.mpae"
        path.write_bytes(good[: len(good) - 200])
        with pytest.raises((ValidationError, ValueError)):
            load_checkpoint(path)

    def test_tensor_shape_mismatch(self, tmp_path):
        small = AutoencoderModel.build(input_shape=(4, 8, 8), seed=0)
        big = AutoencoderModel.build(input_shape=(4, 16, 16), seed=0)
        # same layer specs, but peephole state shapes differ
        good = save_checkpoint(big, tmp_path / "big.mpae").read_bytes()
        import json

        header_len = int(np.frombuffer(good[8:16], dtype="<u8")[0])
        header = json.loads(good[16 : 16 + header_len].decode())
        header["input_shape"] = list(small.input_shape)
        new_header = json.dumps(header, sort_keys=True).encode()
        patched = (
            good[:8]
            + np.uint64(len(new_header)).tobytes()
            + new_header
            + good[16 + header_len :]
        )
        path = tmp_path / "patched.mpae"
        path.write_bytes(patched)
        with pytest.raises(ValidationError, match="shape"):
            load_checkpoint(path)
