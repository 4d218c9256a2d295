"""Shared fixtures: bundled contexts, tiny frames and windows, a small model."""

from __future__ import annotations

import numpy as np
import pytest

from amtransfer.knowledge import bundled_context_path, load_context
from amtransfer.nn.model import AutoencoderModel
from amtransfer.structuring import (
    AnomalyKind,
    Frame,
    FrameLabel,
    WindowSet,
    make_concatenations,
)


@pytest.fixture(scope="session")
def lpbf_context():
    return load_context(bundled_context_path("lpbf_nist"))


@pytest.fixture(scope="session")
def ded_context():
    return load_context(bundled_context_path("ded_msu"))


def make_frames(
    n: int,
    hw: tuple[int, int] = (8, 8),
    anomalous_at: tuple[int, ...] = (),
    seed: int = 0,
) -> list[Frame]:
    """n consecutive frames in one control window, optionally anomalous."""
    rng = np.random.default_rng(seed)
    frames = []
    for t in range(n):
        if t in anomalous_at:
            label, kinds = FrameLabel.ANOMALOUS, (AnomalyKind.SPATTER,)
        else:
            label, kinds = FrameLabel.NORMAL, ()
        frames.append(
            Frame(
                pixels=rng.random(hw) * 0.5 + 0.25,
                layer_index=0,
                control_index=0,
                time_index=t,
                label=label,
                anomaly_kinds=kinds,
            )
        )
    return frames


def make_window_set(
    n_windows: int,
    hw: tuple[int, int] = (8, 8),
    anomalous_at: tuple[int, ...] = (),
    seed: int = 0,
    tag: str = "test",
) -> WindowSet:
    """Window set of ``n_windows`` stride-1 windows over a fresh stream.

    ``anomalous_at`` marks frame indices, so a marked frame taints every
    window containing it.
    """
    frames = make_frames(n_windows + 3, hw, anomalous_at, seed)
    concats = make_concatenations(frames, window=4, stride=1)
    return WindowSet.from_concatenations(concats, process_tag=tag)


@pytest.fixture(scope="session")
def small_model() -> AutoencoderModel:
    """Default architecture at 8x8, shared read-only across tests."""
    return AutoencoderModel.build(input_shape=(4, 8, 8), seed=0)
