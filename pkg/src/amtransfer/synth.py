"""Synthetic melt-pool stream generator.

Produces frame streams for two statistically distinct processes so the
cross-process transfer experiment can run at desk scale with free
ground-truth labels. Normal frames are a single drifting anisotropic
Gaussian blob; anomalies are parametric injections (spatter satellites,
an elongated plume streak, impulse noise, or an over-eccentric pool).
Off-frames (laser idle / recoating) are emitted at a configured rate with
near-zero intensity and no label.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ValidationError
from .structuring import AnomalyKind, BuildDataset, Frame, FrameLabel

#: Stream nesting used for synthetic positions: frames per control window
#: and control windows per layer.
FRAMES_PER_CONTROL = 25
CONTROLS_PER_LAYER = 2

#: Eccentricity bound (sigma_major / sigma_minor) for a normal pool.
NORMAL_ECCENTRICITY_MAX = 1.6
#: Minimum fraction of pixels hit by impulse noise in a noise anomaly.
NOISE_PIXEL_FRACTION = 0.02

_ANOMALY_ORDER = (
    AnomalyKind.SPATTER,
    AnomalyKind.PLUME,
    AnomalyKind.NOISE,
    AnomalyKind.IRREGULAR_SHAPE,
)


@dataclass(frozen=True)
class ProcessProfile:
    """Generation parameters for one process's melt-pool statistics."""

    name: str
    frame_size: tuple[int, int] = (32, 32)
    pool_sigma_range: tuple[float, float] = (2.0, 3.0)
    amplitude_range: tuple[float, float] = (0.75, 0.95)
    drift_per_frame: float = 0.4
    background_level: float = 0.02
    off_frame_rate: float = 0.0
    anomaly_mix: Mapping[str, float] = field(default_factory=dict)

    def validate(self) -> None:
        h, w = self.frame_size
        if h < 8 or w < 8 or h % 4 or w % 4:
            raise ValidationError(
                f"frame_size must be >= 8 and divisible by 4, got {self.frame_size}"
            )
        lo, hi = self.pool_sigma_range
        if not (0 < lo <= hi):
            raise ValidationError(f"bad pool_sigma_range {self.pool_sigma_range}")
        lo, hi = self.amplitude_range
        if not (0 < lo <= hi <= 1):
            raise ValidationError(f"bad amplitude_range {self.amplitude_range}")
        if self.drift_per_frame < 0:
            raise ValidationError("drift_per_frame must be non-negative")
        if not 0 <= self.background_level < 1:
            raise ValidationError("background_level must be in [0, 1)")
        if not 0 <= self.off_frame_rate < 1:
            raise ValidationError("off_frame_rate must be in [0, 1)")
        total = 0.0
        for kind, prob in self.anomaly_mix.items():
            try:
                AnomalyKind(kind)
            except ValueError:
                raise ValidationError(f"unknown anomaly kind {kind!r}") from None
            if prob < 0:
                raise ValidationError(f"negative probability for anomaly {kind!r}")
            total += prob
        if total > 1.0 + 1e-12:
            raise ValidationError(
                f"anomaly_mix probabilities sum to {total}, must be <= 1"
            )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "frame_size": list(self.frame_size),
            "pool_sigma_range": list(self.pool_sigma_range),
            "amplitude_range": list(self.amplitude_range),
            "drift_per_frame": self.drift_per_frame,
            "background_level": self.background_level,
            "off_frame_rate": self.off_frame_rate,
            "anomaly_mix": dict(self.anomaly_mix),
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ProcessProfile":
        profile = cls(
            name=doc["name"],
            frame_size=tuple(doc["frame_size"]),
            pool_sigma_range=tuple(doc["pool_sigma_range"]),
            amplitude_range=tuple(doc["amplitude_range"]),
            drift_per_frame=doc["drift_per_frame"],
            background_level=doc["background_level"],
            off_frame_rate=doc.get("off_frame_rate", 0.0),
            anomaly_mix=dict(doc.get("anomaly_mix", {})),
        )
        profile.validate()
        return profile


def _blob(
    shape: tuple[int, int],
    center: tuple[float, float],
    sigmas: tuple[float, float],
    amplitude: float,
    angle: float = 0.0,
) -> np.ndarray:
    """Anisotropic Gaussian blob, optionally rotated by ``angle`` radians."""
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dy = yy - center[0]
    dx = xx - center[1]
    if angle:
        cos_a, sin_a = np.cos(angle), np.sin(angle)
        dy, dx = cos_a * dy + sin_a * dx, -sin_a * dy + cos_a * dx
    sy, sx = sigmas
    return amplitude * np.exp(-0.5 * ((dy / sy) ** 2 + (dx / sx) ** 2))


def _draw_sigmas(
    rng: np.random.Generator, profile: ProcessProfile
) -> tuple[float, float]:
    """Pool sigmas within range, eccentricity capped at the normal bound."""
    lo, hi = profile.pool_sigma_range
    base = rng.uniform(lo, hi)
    ecc = rng.uniform(1.0, NORMAL_ECCENTRICITY_MAX)
    if rng.random() < 0.5:
        return base * ecc, base
    return base, base * ecc


def _inject_spatter(
    rng: np.random.Generator,
    pixels: np.ndarray,
    center: tuple[float, float],
    sigma: float,
    amplitude: float,
) -> None:
    n_sat = int(rng.integers(1, 5))
    h, w = pixels.shape
    for _ in range(n_sat):
        offset = rng.uniform(3.0 * sigma, 6.0 * sigma)
        theta = rng.uniform(0, 2 * np.pi)
        cy = float(np.clip(center[0] + offset * np.sin(theta), 0, h - 1))
        cx = float(np.clip(center[1] + offset * np.cos(theta), 0, w - 1))
        sat_sigma = sigma * rng.uniform(0.2, 0.45)
        pixels += _blob(
            pixels.shape, (cy, cx), (sat_sigma, sat_sigma), amplitude * rng.uniform(0.5, 0.9)
        )


def _inject_plume(
    rng: np.random.Generator,
    pixels: np.ndarray,
    center: tuple[float, float],
    sigma: float,
    amplitude: float,
) -> None:
    angle = rng.uniform(0, np.pi)
    length = sigma * rng.uniform(3.0, 5.0)
    offset = length * 0.8
    cy = center[0] + offset * np.sin(angle)
    cx = center[1] + offset * np.cos(angle)
    pixels += _blob(
        pixels.shape,
        (cy, cx),
        (length, sigma * 0.6),
        amplitude * rng.uniform(0.25, 0.45),
        angle=angle - np.pi / 2,
    )


def _inject_noise(rng: np.random.Generator, pixels: np.ndarray) -> None:
    h, w = pixels.shape
    n_hits = max(int(np.ceil(NOISE_PIXEL_FRACTION * h * w)), 1)
    n_hits = int(rng.integers(n_hits, 2 * n_hits + 1))
    flat_idx = rng.choice(h * w, size=n_hits, replace=False)
    values = rng.uniform(0.6, 1.0, size=n_hits)
    pixels.flat[flat_idx] = np.maximum(pixels.flat[flat_idx], values)


def _choose_anomaly(
    rng: np.random.Generator, mix: Mapping[str, float]
) -> AnomalyKind | None:
    """One draw deciding normal vs a specific anomaly kind."""
    u = rng.random()
    acc = 0.0
    for kind in _ANOMALY_ORDER:
        acc += float(mix.get(kind.value, 0.0))
        if u < acc:
            return kind
    return None


def generate_stream(
    profile: ProcessProfile, n_frames: int, seed: int
) -> BuildDataset:
    """Generate a labeled synthetic stream of ``n_frames`` frames.

    Deterministic given (profile, n_frames, seed). Positions follow the
    (layer, control, time) nesting with FRAMES_PER_CONTROL frames per
    control window and CONTROLS_PER_LAYER windows per layer.
    """
    profile.validate()
    if n_frames < 1:
        raise ValidationError(f"n_frames must be >= 1, got {n_frames}")
    rng = np.random.default_rng(seed)
    h, w = profile.frame_size
    margin = max(profile.pool_sigma_range[1] * 1.5, 2.0)
    center = np.array([h / 2.0, w / 2.0])

    frames: list[Frame] = []
    for n in range(n_frames):
        time_index = n % FRAMES_PER_CONTROL
        control_index = (n // FRAMES_PER_CONTROL) % CONTROLS_PER_LAYER
        layer_index = n // (FRAMES_PER_CONTROL * CONTROLS_PER_LAYER)

        step = rng.normal(0.0, profile.drift_per_frame, size=2)
        center = np.clip(center + step, margin, [h - 1 - margin, w - 1 - margin])

        if rng.random() < profile.off_frame_rate:
            pixels = np.clip(
                rng.normal(0.0, 0.002, size=(h, w)) + profile.background_level * 0.1,
                0.0,
                1.0,
            )
            frames.append(
                Frame(
                    pixels=pixels,
                    layer_index=layer_index,
                    control_index=control_index,
                    time_index=time_index,
                    label=FrameLabel.UNLABELED,
                    provenance=f"synth:{profile.name}",
                )
            )
            continue

        amplitude = rng.uniform(*profile.amplitude_range)
        kind = _choose_anomaly(rng, profile.anomaly_mix)

        if kind is AnomalyKind.IRREGULAR_SHAPE:
            lo, hi = profile.pool_sigma_range
            base = rng.uniform(lo, hi)
            ecc = rng.uniform(NORMAL_ECCENTRICITY_MAX * 1.5, NORMAL_ECCENTRICITY_MAX * 2.5)
            sigmas = (base * ecc, base)
            angle = rng.uniform(0, np.pi)
        else:
            sigmas = _draw_sigmas(rng, profile)
            angle = 0.0

        pixels = _blob((h, w), tuple(center), sigmas, amplitude, angle=angle)
        pixels += profile.background_level
        pixels += rng.normal(0.0, 0.004, size=(h, w))

        mean_sigma = float(np.sqrt(sigmas[0] * sigmas[1]))
        if kind is AnomalyKind.SPATTER:
            _inject_spatter(rng, pixels, tuple(center), mean_sigma, amplitude)
        elif kind is AnomalyKind.PLUME:
            _inject_plume(rng, pixels, tuple(center), mean_sigma, amplitude)
        elif kind is AnomalyKind.NOISE:
            _inject_noise(rng, pixels)

        frames.append(
            Frame(
                pixels=np.clip(pixels, 0.0, 1.0),
                layer_index=layer_index,
                control_index=control_index,
                time_index=time_index,
                label=FrameLabel.NORMAL if kind is None else FrameLabel.ANOMALOUS,
                anomaly_kinds=() if kind is None else (kind,),
                provenance=f"synth:{profile.name}",
            )
        )

    return BuildDataset.from_frames(frames, process_tag=f"synth:{profile.name}")


def default_profiles(
    frame_hw: tuple[int, int] = (32, 32),
) -> tuple[ProcessProfile, ProcessProfile]:
    """(lpbf_like, ded_like) profiles with distinct pool statistics.

    The two share frame_size (equal feature space) but differ in pool
    scale, amplitude, drift, and background so their marginal frame
    distributions are clearly separable.
    """
    scale = min(frame_hw) / 32.0
    lpbf_like = ProcessProfile(
        name="lpbf_like",
        frame_size=frame_hw,
        pool_sigma_range=(1.6 * scale, 2.2 * scale),
        amplitude_range=(0.8, 0.95),
        drift_per_frame=0.5 * scale,
        background_level=0.015,
        off_frame_rate=0.12,
        anomaly_mix={},
    )
    ded_like = ProcessProfile(
        name="ded_like",
        frame_size=frame_hw,
        pool_sigma_range=(3.0 * scale, 4.2 * scale),
        amplitude_range=(0.55, 0.75),
        drift_per_frame=0.25 * scale,
        background_level=0.06,
        off_frame_rate=0.12,
        anomaly_mix={},
    )
    lpbf_like.validate()
    ded_like.validate()
    return lpbf_like, ded_like
