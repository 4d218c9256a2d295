"""Experiment configuration: one JSON document drives a full run.

Every field has a recorded default and the fully-resolved config is
echoed into each output artifact, so any artifact can be reproduced from
its embedded config plus seed.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping

from .errors import ValidationError


@dataclass(frozen=True)
class DataRecipe:
    """Synthetic cross-process data sizing."""

    frame_hw: tuple[int, int] = (16, 16)
    n_source_frames: int = 915
    n_target_frames: int = 300
    window: int = 4
    stride: int = 1
    inactive_mean_threshold: float = 0.02
    target_anomaly_mix: Mapping[str, float] = field(
        default_factory=lambda: {
            "spatter": 0.02,
            "plume": 0.015,
            "noise": 0.01,
            "irregular_shape": 0.005,
        }
    )
    n_source_train_windows: int = 800
    n_target_train_windows: int = 160

    def __post_init__(self) -> None:
        object.__setattr__(self, "frame_hw", tuple(self.frame_hw))
        object.__setattr__(self, "target_anomaly_mix", dict(self.target_anomaly_mix))
        if self.window < 1 or self.stride < 1:
            raise ValidationError("window and stride must be >= 1")


@dataclass(frozen=True)
class TrainRecipe:
    """Optimization settings for source training and fine-tuning."""

    source_epochs: int = 8
    transfer_epoch_budget: int = 12
    batch_size: int = 16
    learning_rate: float = 5e-4

    def __post_init__(self) -> None:
        if self.source_epochs < 0 or self.transfer_epoch_budget < 0:
            raise ValidationError("epoch counts must be >= 0")


@dataclass(frozen=True)
class ScoringRecipe:
    """Threshold rule and scoring variants."""

    threshold_rule: str = "kth_min_regularity"
    k: int = 3
    percentile: float = 99.0
    cost_metric: str = "squared"
    window_cost: str = "sum"
    normalization: str = "paper"


@dataclass(frozen=True)
class ExperimentConfig:
    """Top-level config for the desk-scale cross-process experiment."""

    seeds: tuple[int, ...] = (11, 12, 13)
    output_dir: str = "runs/desk"
    data: DataRecipe = field(default_factory=DataRecipe)
    training: TrainRecipe = field(default_factory=TrainRecipe)
    scoring: ScoringRecipe = field(default_factory=ScoringRecipe)
    make_plots: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.seeds:
            raise ValidationError("at least one seed is required")

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["schema_version"] = 1
        doc["seeds"] = list(self.seeds)
        doc["data"]["frame_hw"] = list(self.data.frame_hw)
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ExperimentConfig":
        doc = dict(doc)
        version = doc.pop("schema_version", 1)
        if version != 1:
            raise ValidationError(f"unsupported config schema_version {version!r}")
        data = DataRecipe(**doc.pop("data", {}))
        training = TrainRecipe(**doc.pop("training", {}))
        scoring = ScoringRecipe(**doc.pop("scoring", {}))
        return cls(data=data, training=training, scoring=scoring, **doc)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    def with_overrides(self, **kwargs) -> "ExperimentConfig":
        return replace(self, **kwargs)

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path


def bundled_config_path(name: str = "desk_recipe") -> Path:
    path = Path(__file__).parent / "data" / f"{name}.json"
    if not path.is_file():
        raise ValidationError(f"no bundled config named {name!r}")
    return path


def load_bundled_config(name: str = "desk_recipe") -> ExperimentConfig:
    return ExperimentConfig.load(bundled_config_path(name))
