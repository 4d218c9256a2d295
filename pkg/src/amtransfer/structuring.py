"""Melt-pool image stream structuring.

Frames from an in-situ monitoring camera arrive as a nested stream: layer
index i, intra-layer control index j, frame time index k. This module
validates that ordering, drops inactive (melt-pool-off) frames, and
groups the survivors into fixed-length spatiotemporal concatenations that
the autoencoder consumes.

A concatenation of length T is the stack of T consecutive retained frames;
windows advance by a configurable stride (default 1). A window inherits
the worst label among its frames: any anomalous frame makes the window
anomalous, otherwise any unlabeled frame makes it unlabeled, otherwise it
is normal.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import LabelingError, ValidationError

WINDOW_LENGTH = 4

PNG_MAX_U16 = 65535


class FrameLabel(str, Enum):
    NORMAL = "normal"
    ANOMALOUS = "anomalous"
    UNLABELED = "unlabeled"


class AnomalyKind(str, Enum):
    SPATTER = "spatter"
    PLUME = "plume"
    NOISE = "noise"
    IRREGULAR_SHAPE = "irregular_shape"


@dataclass(eq=False)
class Frame:
    """One monitoring frame with its stream position and label.

    ``pixels`` is a 2-D float array in [0, 1]. ``anomaly_kinds`` names the
    injected or annotated anomaly types when the label is anomalous.
    """

    pixels: np.ndarray
    layer_index: int
    control_index: int
    time_index: int
    label: FrameLabel = FrameLabel.UNLABELED
    anomaly_kinds: tuple[AnomalyKind, ...] = ()
    provenance: str = ""

    def __post_init__(self) -> None:
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 2:
            raise ValidationError(
                f"frame pixels must be 2-D, got shape {self.pixels.shape}"
            )
        for name, idx in (
            ("layer_index", self.layer_index),
            ("control_index", self.control_index),
            ("time_index", self.time_index),
        ):
            if not isinstance(idx, (int, np.integer)) or idx < 0:
                raise ValidationError(f"{name} must be a non-negative integer, got {idx!r}")
        self.label = FrameLabel(self.label)
        self.anomaly_kinds = tuple(AnomalyKind(k) for k in self.anomaly_kinds)
        if self.anomaly_kinds and self.label is not FrameLabel.ANOMALOUS:
            raise ValidationError("anomaly_kinds set on a non-anomalous frame")

    @property
    def position(self) -> tuple[int, int, int]:
        return (self.layer_index, self.control_index, self.time_index)


@dataclass
class BuildDataset:
    """A validated, ordered frame stream from one build / process run."""

    frames: list[Frame]
    frame_shape: tuple[int, int]
    process_tag: str = ""

    @classmethod
    def from_frames(
        cls,
        frames: Sequence[Frame],
        bounds: tuple[int, int, int] | None = None,
        process_tag: str = "",
    ) -> "BuildDataset":
        """Validate ordering/shape and wrap the frames.

        Positions (i, j, k) must be strictly increasing lexicographically.
        ``bounds`` = (layers, controls, frames-per-control) caps each index
        when given. All frames must share one pixel shape.
        """
        if not frames:
            raise ValidationError("dataset needs at least one frame")
        shape = frames[0].pixels.shape
        prev: tuple[int, int, int] | None = None
        for n, frame in enumerate(frames):
            if frame.pixels.shape != shape:
                raise ValidationError(
                    f"frame {n} shape {frame.pixels.shape} != expected {shape}"
                )
            pos = frame.position
            if bounds is not None:
                for axis, (idx, bound) in enumerate(zip(pos, bounds)):
                    if idx >= bound:
                        raise ValidationError(
                            f"frame {n} index {idx} exceeds bound {bound} on axis {axis}"
                        )
            if prev is not None and pos <= prev:
                raise ValidationError(
                    f"frame {n} position {pos} does not follow {prev};"
                    " stream must be strictly ordered by (layer, control, time)"
                )
            prev = pos
        return cls(frames=list(frames), frame_shape=shape, process_tag=process_tag)

    def __len__(self) -> int:
        return len(self.frames)

    def label_counts(self) -> dict[str, int]:
        counts = {label.value: 0 for label in FrameLabel}
        for frame in self.frames:
            counts[frame.label.value] += 1
        return counts


@dataclass(eq=False)
class Concatenation:
    """A window of T consecutive retained frames, stacked along time."""

    pixels: np.ndarray
    frames: tuple[Frame, ...]
    label: FrameLabel
    start_index: int

    @property
    def window_length(self) -> int:
        return self.pixels.shape[0]

    @property
    def anomaly_kinds(self) -> tuple[AnomalyKind, ...]:
        kinds: list[AnomalyKind] = []
        for frame in self.frames:
            for k in frame.anomaly_kinds:
                if k not in kinds:
                    kinds.append(k)
        return tuple(kinds)


def filter_inactive(
    frames: Iterable[Frame], mean_threshold: float = 0.02
) -> list[Frame]:
    """Drop frames whose mean intensity falls below ``mean_threshold``.

    Removes melt-pool-off frames (recoating, laser idle) that carry no
    process signal.
    """
    if mean_threshold < 0:
        raise ValidationError("mean_threshold must be non-negative")
    return [f for f in frames if float(f.pixels.mean()) >= mean_threshold]


def _window_label(frames: Sequence[Frame]) -> FrameLabel:
    labels = {f.label for f in frames}
    if FrameLabel.ANOMALOUS in labels:
        return FrameLabel.ANOMALOUS
    if FrameLabel.UNLABELED in labels:
        return FrameLabel.UNLABELED
    return FrameLabel.NORMAL


def make_concatenations(
    frames: Sequence[Frame],
    window: int = WINDOW_LENGTH,
    stride: int = 1,
) -> list[Concatenation]:
    """Slide a length-``window`` window over the retained frame sequence.

    Yields floor((len(frames) - window) / stride) + 1 concatenations; a
    sequence shorter than the window yields none (with a warning).
    """
    if window < 1:
        raise ValidationError(f"window must be >= 1, got {window}")
    if stride < 1:
        raise ValidationError(f"stride must be >= 1, got {stride}")
    frames = list(frames)
    if len(frames) < window:
        warnings.warn(
            f"only {len(frames)} frames for window length {window};"
            " no concatenations produced",
            stacklevel=2,
        )
        return []
    result: list[Concatenation] = []
    for start in range(0, len(frames) - window + 1, stride):
        chunk = frames[start : start + window]
        stack = np.stack([f.pixels for f in chunk], axis=0)
        result.append(
            Concatenation(
                pixels=stack,
                frames=tuple(chunk),
                label=_window_label(chunk),
                start_index=start,
            )
        )
    return result


def split_normal_anomalous(
    concats: Sequence[Concatenation],
) -> tuple[list[Concatenation], list[Concatenation]]:
    """Partition windows into (normal, anomalous); unlabeled is an error."""
    normal: list[Concatenation] = []
    anomalous: list[Concatenation] = []
    for c in concats:
        if c.label is FrameLabel.UNLABELED:
            raise LabelingError(
                f"window at start index {c.start_index} is unlabeled;"
                " label every frame before splitting"
            )
        (normal if c.label is FrameLabel.NORMAL else anomalous).append(c)
    return normal, anomalous


@dataclass
class WindowSet:
    """Array-backed window collection for on-disk exchange.

    Carries the pixels, window labels, and start indices but not the
    per-frame metadata; use it to hand structured windows between the
    structure / train / transfer / evaluate stages.
    """

    pixels: np.ndarray
    labels: list[FrameLabel]
    start_indices: list[int]
    process_tag: str = ""

    def __post_init__(self) -> None:
        self.pixels = np.asarray(self.pixels)
        if self.pixels.ndim != 4:
            raise ValidationError(
                f"window pixels must be (N, T, H, W), got {self.pixels.shape}"
            )
        if not (len(self.labels) == len(self.start_indices) == len(self.pixels)):
            raise ValidationError("pixels, labels, and start_indices disagree in length")
        self.labels = [FrameLabel(lab) for lab in self.labels]

    def __len__(self) -> int:
        return len(self.labels)

    @classmethod
    def from_concatenations(
        cls, concats: Sequence[Concatenation], process_tag: str = ""
    ) -> "WindowSet":
        if not concats:
            raise ValidationError("empty concatenation list")
        return cls(
            pixels=np.stack([c.pixels for c in concats], axis=0),
            labels=[c.label for c in concats],
            start_indices=[c.start_index for c in concats],
            process_tag=process_tag,
        )

    def to_concatenations(self) -> list[Concatenation]:
        return [
            Concatenation(
                pixels=self.pixels[n],
                frames=(),
                label=self.labels[n],
                start_index=self.start_indices[n],
            )
            for n in range(len(self))
        ]

    def subset(self, indices: Sequence[int]) -> "WindowSet":
        indices = list(indices)
        return WindowSet(
            pixels=self.pixels[indices],
            labels=[self.labels[i] for i in indices],
            start_indices=[self.start_indices[i] for i in indices],
            process_tag=self.process_tag,
        )

    def normal_indices(self) -> list[int]:
        return [n for n, lab in enumerate(self.labels) if lab is FrameLabel.NORMAL]

    def anomalous_indices(self) -> list[int]:
        return [n for n, lab in enumerate(self.labels) if lab is FrameLabel.ANOMALOUS]

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez_compressed(
            path,
            pixels=self.pixels.astype(np.float32),
            labels=np.array([lab.value for lab in self.labels]),
            start_indices=np.array(self.start_indices, dtype=np.int64),
            process_tag=np.array(self.process_tag),
        )
        return path if path.suffix == ".npz" else path.with_suffix(path.suffix + ".npz")

    @classmethod
    def load(cls, path: str | Path) -> "WindowSet":
        with np.load(path, allow_pickle=False) as doc:
            return cls(
                pixels=doc["pixels"].astype(np.float64),
                labels=[FrameLabel(str(lab)) for lab in doc["labels"]],
                start_indices=[int(i) for i in doc["start_indices"]],
                process_tag=str(doc["process_tag"]),
            )


def save_dataset(dataset: BuildDataset, directory: str | Path) -> Path:
    """Write a dataset as 16-bit grayscale PNGs plus a JSON manifest."""
    from PIL import Image

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    digits = max(6, len(str(len(dataset.frames))))
    for n, frame in enumerate(dataset.frames):
        name = f"frame_{n:0{digits}d}.png"
        scaled = np.clip(frame.pixels, 0.0, 1.0) * PNG_MAX_U16
        img = Image.fromarray(np.round(scaled).astype(np.uint16))
        img.save(directory / name)
        entries.append(
            {
                "file": name,
                "layer_index": frame.layer_index,
                "control_index": frame.control_index,
                "time_index": frame.time_index,
                "label": frame.label.value,
                "anomaly_kinds": [k.value for k in frame.anomaly_kinds],
                "provenance": frame.provenance,
            }
        )
    manifest = {
        "schema_version": 1,
        "frame_shape": list(dataset.frame_shape),
        "process_tag": dataset.process_tag,
        "frames": entries,
    }
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def load_dataset(directory: str | Path) -> BuildDataset:
    """Load a dataset written by :func:`save_dataset`."""
    from PIL import Image

    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.is_file():
        raise ValidationError(f"no manifest.json in {directory}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("schema_version") != 1:
        raise ValidationError(
            f"unsupported dataset schema_version {manifest.get('schema_version')!r}"
        )
    frames = []
    for entry in manifest["frames"]:
        img = np.asarray(Image.open(directory / entry["file"]), dtype=np.float64)
        frames.append(
            Frame(
                pixels=img / PNG_MAX_U16,
                layer_index=entry["layer_index"],
                control_index=entry["control_index"],
                time_index=entry["time_index"],
                label=FrameLabel(entry["label"]),
                anomaly_kinds=tuple(
                    AnomalyKind(k) for k in entry.get("anomaly_kinds", [])
                ),
                provenance=entry.get("provenance", ""),
            )
        )
    return BuildDataset.from_frames(
        frames, process_tag=manifest.get("process_tag", "")
    )
