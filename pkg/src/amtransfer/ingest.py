"""Real melt-pool image ingest.

Loads image sequences from a directory, applies the standard preprocessing
chain (grayscale conversion, crop, resize, normalization), and emits the
same BuildDataset the synthetic generator produces, so real and synthetic
frames flow through one pipeline.

Normalization is global byte-range scaling (0..255 or 0..65535 down to
[0, 1] depending on bit depth), not per-frame min-max; per-frame scaling
would erase the absolute intensity cues anomaly scoring relies on.
Labels come from an optional sidecar ``labels.json`` mapping filename to
{"label": ..., "anomaly_kinds": [...]}; unlisted frames stay unlabeled.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import IngestError, ValidationError
from .structuring import AnomalyKind, BuildDataset, Frame, FrameLabel

#: Rec. 601 luminance weights for RGB -> grayscale, applied in float.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

IMAGE_SUFFIXES = (".png", ".tif", ".tiff")


class Ordering(str, Enum):
    BY_FILENAME = "by_filename"
    BY_MANIFEST = "by_manifest"


class AugmentationKind(str, Enum):
    ROTATION = "rotation"
    SCALE = "scale"


@dataclass(frozen=True)
class Augmentation:
    """One augmentation: rotation in degrees or an isotropic scale factor."""

    kind: AugmentationKind
    amount: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", AugmentationKind(self.kind))
        if self.kind is AugmentationKind.SCALE and self.amount <= 0:
            raise ValidationError(f"scale factor must be positive, got {self.amount}")

    @property
    def tag(self) -> str:
        if self.kind is AugmentationKind.ROTATION:
            return f"rot{self.amount:g}"
        return f"scale{self.amount:g}"


@dataclass
class IngestSpec:
    """Preprocessing recipe for one image directory."""

    source_dir: str | Path
    ordering: Ordering = Ordering.BY_FILENAME
    roi: tuple[int, int, int, int] | None = None
    to_grayscale: bool = True
    resize_to: tuple[int, int] | None = None
    normalize: bool = True
    augmentations: list[Augmentation] = field(default_factory=list)
    process_tag: str = ""

    def __post_init__(self) -> None:
        self.source_dir = Path(self.source_dir)
        self.ordering = Ordering(self.ordering)
        if self.roi is not None:
            x, y, w, h = self.roi
            if min(x, y) < 0 or min(w, h) < 1:
                raise ValidationError(f"bad roi {self.roi}")
        if self.resize_to is not None:
            th, tw = self.resize_to
            if th < 4 or tw < 4 or th % 4 or tw % 4:
                raise ValidationError(
                    f"resize_to must be divisible by 4, got {self.resize_to}"
                )


def _ordered_files(spec: IngestSpec) -> list[Path]:
    directory = Path(spec.source_dir)
    if not directory.is_dir():
        raise IngestError(f"source directory does not exist: {directory}")
    if spec.ordering is Ordering.BY_MANIFEST:
        manifest_path = directory / "manifest.json"
        if not manifest_path.is_file():
            raise IngestError(f"ordering=by_manifest but no manifest.json in {directory}")
        manifest = json.loads(manifest_path.read_text())
        names = [entry["file"] for entry in manifest["frames"]]
        return [directory / name for name in names]
    files = sorted(
        p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
    )
    if not files:
        raise IngestError(f"no image files in {directory}")
    return files


def _load_pixels(path: Path, spec: IngestSpec) -> np.ndarray:
    from PIL import Image

    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            arr = np.asarray(img, dtype=np.float64)
    except (OSError, ValueError) as exc:
        raise IngestError(f"unreadable image {path.name}: {exc}") from exc

    if arr.ndim == 3:
        if not spec.to_grayscale:
            raise IngestError(
                f"{path.name} is multi-channel but to_grayscale is off"
            )
        r, g, b = LUMA_WEIGHTS
        arr = r * arr[..., 0] + g * arr[..., 1] + b * arr[..., 2]

    if spec.roi is not None:
        x, y, w, h = spec.roi
        ih, iw = arr.shape
        if y + h > ih or x + w > iw:
            raise ValidationError(
                f"roi {spec.roi} outside {iw}x{ih} image {path.name}"
            )
        arr = arr[y : y + h, x : x + w]

    if spec.resize_to is not None and arr.shape != tuple(spec.resize_to):
        from scipy import ndimage

        th, tw = spec.resize_to
        arr = ndimage.zoom(arr, (th / arr.shape[0], tw / arr.shape[1]), order=1)
        arr = arr[:th, :tw]

    if spec.normalize:
        if mode in ("I;16", "I;16B", "I;16L", "I"):
            arr = arr / 65535.0
        elif mode == "F":
            pass
        else:
            arr = arr / 255.0
        arr = np.clip(arr, 0.0, 1.0)
    return arr


def _load_labels(directory: Path) -> dict[str, dict]:
    path = directory / "labels.json"
    if not path.is_file():
        return {}
    doc = json.loads(path.read_text())
    if not isinstance(doc, dict):
        raise IngestError("labels.json must map filename to a label record")
    return doc


def ingest(spec: IngestSpec) -> BuildDataset:
    """Load, preprocess, and label a directory of melt-pool images."""
    files = _ordered_files(spec)
    labels = _load_labels(Path(spec.source_dir))
    frames: list[Frame] = []
    for n, path in enumerate(files):
        pixels = _load_pixels(path, spec)
        record = labels.get(path.name, {})
        frames.append(
            Frame(
                pixels=pixels,
                layer_index=0,
                control_index=0,
                time_index=n,
                label=FrameLabel(record.get("label", FrameLabel.UNLABELED)),
                anomaly_kinds=tuple(
                    AnomalyKind(k) for k in record.get("anomaly_kinds", [])
                ),
                provenance=f"ingest:{path.name}",
            )
        )
    tag = spec.process_tag or Path(spec.source_dir).name
    return BuildDataset.from_frames(frames, process_tag=tag)


def _rotate(pixels: np.ndarray, degrees: float) -> np.ndarray:
    if degrees % 90 == 0:
        return np.rot90(pixels, k=int(degrees // 90) % 4).copy()
    from scipy import ndimage

    return ndimage.rotate(
        pixels, degrees, reshape=False, order=1, mode="constant", cval=0.0
    )


def _scale(pixels: np.ndarray, factor: float) -> np.ndarray:
    """Zoom about the center, then crop/pad back to the original shape."""
    from scipy import ndimage

    h, w = pixels.shape
    zoomed = ndimage.zoom(pixels, factor, order=1)
    zh, zw = zoomed.shape
    out = np.zeros_like(pixels)
    if zh >= h:
        top, left = (zh - h) // 2, (zw - w) // 2
        out[:, :] = zoomed[top : top + h, left : left + w]
    else:
        top, left = (h - zh) // 2, (w - zw) // 2
        out[top : top + zh, left : left + zw] = zoomed
    return out


def apply_augmentations(
    dataset: BuildDataset, augs: Sequence[Augmentation]
) -> BuildDataset:
    """Original frames plus one augmented copy block per augmentation.

    Output ordering is deterministic: the original block first, then the
    augmented blocks in the order given. Augmented copies keep their
    source frame's label and gain a provenance suffix; their layer_index
    is offset per block so stream positions stay unique and ordered.
    """
    augs = [a if isinstance(a, Augmentation) else Augmentation(**a) for a in augs]
    if not augs:
        return dataset
    layer_span = max(f.layer_index for f in dataset.frames) + 1
    out = list(dataset.frames)
    for block, aug in enumerate(augs, start=1):
        for frame in dataset.frames:
            if aug.kind is AugmentationKind.ROTATION:
                pixels = _rotate(frame.pixels, aug.amount)
            else:
                pixels = _scale(frame.pixels, aug.amount)
            out.append(
                Frame(
                    pixels=np.clip(pixels, 0.0, 1.0),
                    layer_index=frame.layer_index + block * layer_span,
                    control_index=frame.control_index,
                    time_index=frame.time_index,
                    label=frame.label,
                    anomaly_kinds=frame.anomaly_kinds,
                    provenance=f"{frame.provenance}+{aug.tag}",
                )
            )
    return BuildDataset.from_frames(out, process_tag=dataset.process_tag)
