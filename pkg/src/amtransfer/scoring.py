"""Reconstruction-cost regularity scoring and anomaly detection.

For each window the per-frame cost d_t is the sum over pixels of the
pixel-wise reconstruction difference (squared by default), and the window
cost r_t sums d_t over the window's frames. Costs are normalized against
a reference set (the training windows):

    sa = (r - r_min) / r_max        abnormality
    sr = 1 - sa                     regularity

The default ("paper") normalization divides by r_max alone, which makes
sr exactly 1 at the reference minimum but tops sa out below 1; the
conventional min-max denominator (r_max - r_min) is available via
``normalization="range"``. Queries costlier than anything in the
reference set can push sr below 0 (or above 1 on the cheap side); raw
values are stored and clamping happens only in display fields.

Detection: a window is flagged anomalous when its regularity falls below
the threshold (regularity rules) or its cost rises above it (error
rules). Accuracy is the percentage of anomalous windows detected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ShapeError, ValidationError
from .structuring import Concatenation, FrameLabel


class ThresholdRule(str, Enum):
    KTH_MIN_REGULARITY = "kth_min_regularity"
    MAX_TRAIN_ERROR = "max_train_error"
    PERCENTILE_ERROR = "percentile_error"


#: Rules that compare window cost r against the threshold instead of sr.
_ERROR_RULES = (ThresholdRule.MAX_TRAIN_ERROR, ThresholdRule.PERCENTILE_ERROR)


class CostMetric(str, Enum):
    SQUARED = "squared"
    ABSOLUTE = "absolute"


class WindowCost(str, Enum):
    #: r_t = sum of the window's frame costs.
    SUM = "sum"
    #: r_t = the window's single worst frame cost; use when fine-tuning may
    #: have regularized most frames of an anomalous window.
    FRAME_MAX = "frame_max"


class Normalization(str, Enum):
    #: sa = (r - r_min) / r_max; the denominator is the reference maximum alone.
    PAPER = "paper"
    #: Conventional min-max: sa = (r - r_min) / (r_max - r_min).
    RANGE = "range"


def frame_costs(
    original: np.ndarray,
    reconstructed: np.ndarray,
    metric: CostMetric = CostMetric.SQUARED,
) -> np.ndarray:
    """Per-frame costs d_t for stacked windows (..., T, H, W) -> (..., T)."""
    original = np.asarray(original, dtype=np.float64)
    reconstructed = np.asarray(reconstructed, dtype=np.float64)
    if original.shape != reconstructed.shape:
        raise ShapeError(
            f"original {original.shape} and reconstruction {reconstructed.shape} differ"
        )
    diff = original - reconstructed
    per_pixel = diff * diff if CostMetric(metric) is CostMetric.SQUARED else np.abs(diff)
    return per_pixel.sum(axis=(-2, -1))


def window_costs(
    d: np.ndarray, window_cost: WindowCost = WindowCost.SUM
) -> np.ndarray:
    """Window costs r from per-frame costs (..., T) -> (...)."""
    d = np.asarray(d, dtype=np.float64)
    if WindowCost(window_cost) is WindowCost.SUM:
        return d.sum(axis=-1)
    return d.max(axis=-1)


def reconstruction_costs(
    model,
    windows: Sequence[Concatenation] | np.ndarray,
    metric: CostMetric = CostMetric.SQUARED,
    window_cost: WindowCost = WindowCost.SUM,
    batch_size: int = 32,
) -> tuple[np.ndarray, np.ndarray]:
    """(d, r) for a window set: d is (N, T) frame costs, r is (N,) costs."""
    if not isinstance(windows, np.ndarray):
        if not windows:
            raise ValidationError("empty window set")
        windows = np.stack([c.pixels for c in windows], axis=0)
    d_parts = []
    for start in range(0, len(windows), batch_size):
        batch = windows[start : start + batch_size]
        out = model.forward(batch, training=False)
        d_parts.append(frame_costs(batch, out, metric))
    d = np.concatenate(d_parts, axis=0)
    return d, window_costs(d, window_cost)


@dataclass(frozen=True)
class RegularityStats:
    """Normalization constants taken from the reference (train) costs."""

    r_min: float
    r_max: float
    normalization: Normalization = Normalization.PAPER

    @property
    def degenerate(self) -> bool:
        denom = (
            self.r_max
            if self.normalization is Normalization.PAPER
            else self.r_max - self.r_min
        )
        return denom <= 0.0


def regularity_stats(
    train_costs: np.ndarray, normalization: Normalization = Normalization.PAPER
) -> RegularityStats:
    train_costs = np.asarray(train_costs, dtype=np.float64)
    if train_costs.size == 0:
        raise ValidationError("normalization set is empty")
    return RegularityStats(
        r_min=float(train_costs.min()),
        r_max=float(train_costs.max()),
        normalization=Normalization(normalization),
    )


def regularity(
    stats: RegularityStats, costs: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """(sa, sr) for query costs; raw values, not clamped.

    A zero denominator means the reference set carries no cost spread and
    hence no anomaly signal; everything scores maximally regular (sa=0,
    sr=1).
    """
    costs = np.asarray(costs, dtype=np.float64)
    if stats.degenerate:
        sa = np.zeros_like(costs)
        return sa, 1.0 - sa
    denom = (
        stats.r_max
        if stats.normalization is Normalization.PAPER
        else stats.r_max - stats.r_min
    )
    sa = (costs - stats.r_min) / denom
    return sa, 1.0 - sa


def select_threshold(
    train_values: np.ndarray,
    rule: ThresholdRule = ThresholdRule.KTH_MIN_REGULARITY,
    k: int = 3,
    percentile: float = 99.0,
) -> float:
    """Detection threshold from training statistics.

    kth_min_regularity expects train *regularity* values (sr) and returns
    the k-th smallest, skipping past noisy outliers; the error rules
    expect train *costs* (r) and return the max or the given percentile.
    """
    values = np.asarray(train_values, dtype=np.float64)
    if values.size == 0:
        raise ValidationError("cannot select a threshold from an empty set")
    rule = ThresholdRule(rule)
    if rule is ThresholdRule.KTH_MIN_REGULARITY:
        if not 1 <= k <= values.size:
            raise ValidationError(
                f"k={k} out of range for a set of {values.size} values"
            )
        return float(np.sort(values)[k - 1])
    if rule is ThresholdRule.MAX_TRAIN_ERROR:
        return float(values.max())
    if not 0 <= percentile <= 100:
        raise ValidationError(f"percentile must be in [0, 100], got {percentile}")
    return float(np.percentile(values, percentile))


def detect(
    rule: ThresholdRule, threshold: float, sr: np.ndarray, costs: np.ndarray
) -> np.ndarray:
    """Boolean detection mask per window for the given rule."""
    if ThresholdRule(rule) in _ERROR_RULES:
        return np.asarray(costs) > threshold
    return np.asarray(sr) < threshold


@dataclass
class WindowScore:
    frame_costs: list[float]
    cost: float
    abnormality: float
    regularity: float
    label: str
    detected: bool

    def to_dict(self) -> dict:
        return {
            "frame_costs": self.frame_costs,
            "cost": self.cost,
            "abnormality": self.abnormality,
            "regularity": self.regularity,
            "regularity_display": float(np.clip(self.regularity, 0.0, 1.0)),
            "label": self.label,
            "detected": self.detected,
        }


@dataclass
class RegularityReport:
    """Detection outcome for one evaluation set."""

    records: list[WindowScore]
    r_min: float
    r_max: float
    normalization: Normalization
    threshold: float
    threshold_rule: ThresholdRule
    accuracy_pct: float
    n_anomalous: int
    n_detected: int
    false_positive_pct: float | None = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "records": [r.to_dict() for r in self.records],
            "r_min": self.r_min,
            "r_max": self.r_max,
            "normalization": self.normalization.value,
            "threshold": self.threshold,
            "threshold_rule": self.threshold_rule.value,
            "accuracy_pct": self.accuracy_pct,
            "n_anomalous": self.n_anomalous,
            "n_detected": self.n_detected,
            "false_positive_pct": self.false_positive_pct,
            "notes": list(self.notes),
        }

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return path


def evaluate(
    test_windows: Sequence[Concatenation],
    d: np.ndarray,
    costs: np.ndarray,
    stats: RegularityStats,
    threshold: float,
    rule: ThresholdRule,
) -> RegularityReport:
    """Score a labeled test set against a threshold.

    Requires at least one anomalous window (the accuracy metric is the
    detected share of anomalies); false positives on normal windows are
    reported as a supplementary rate.
    """
    if len(test_windows) != len(costs):
        raise ShapeError(
            f"{len(test_windows)} windows but {len(costs)} cost entries"
        )
    labels = [c.label for c in test_windows]
    n_anomalous = sum(1 for lab in labels if lab is FrameLabel.ANOMALOUS)
    if n_anomalous == 0:
        raise ValidationError(
            "evaluation set has no anomalous windows; the detection metric is undefined"
        )
    sa, sr = regularity(stats, costs)
    mask = detect(rule, threshold, sr, costs)
    records = [
        WindowScore(
            frame_costs=[float(v) for v in d[n]],
            cost=float(costs[n]),
            abnormality=float(sa[n]),
            regularity=float(sr[n]),
            label=labels[n].value,
            detected=bool(mask[n]),
        )
        for n in range(len(costs))
    ]
    n_detected = sum(
        1 for rec, lab in zip(records, labels)
        if lab is FrameLabel.ANOMALOUS and rec.detected
    )
    n_normal = sum(1 for lab in labels if lab is FrameLabel.NORMAL)
    fp = None
    if n_normal:
        n_fp = sum(
            1 for rec, lab in zip(records, labels)
            if lab is FrameLabel.NORMAL and rec.detected
        )
        fp = 100.0 * n_fp / n_normal
    return RegularityReport(
        records=records,
        r_min=stats.r_min,
        r_max=stats.r_max,
        normalization=stats.normalization,
        threshold=threshold,
        threshold_rule=ThresholdRule(rule),
        accuracy_pct=100.0 * n_detected / n_anomalous,
        n_anomalous=n_anomalous,
        n_detected=n_detected,
        false_positive_pct=fp,
    )


def score_and_evaluate(
    model,
    train_windows: Sequence[Concatenation] | np.ndarray,
    test_windows: Sequence[Concatenation],
    rule: ThresholdRule = ThresholdRule.KTH_MIN_REGULARITY,
    k: int = 3,
    percentile: float = 99.0,
    metric: CostMetric = CostMetric.SQUARED,
    window_cost: WindowCost = WindowCost.SUM,
    normalization: Normalization = Normalization.PAPER,
) -> RegularityReport:
    """Full pipeline: costs, normalization from train, threshold, evaluate."""
    _, train_r = reconstruction_costs(model, train_windows, metric, window_cost)
    stats = regularity_stats(train_r, normalization)
    rule = ThresholdRule(rule)
    if rule is ThresholdRule.KTH_MIN_REGULARITY:
        _, train_sr = regularity(stats, train_r)
        threshold = select_threshold(train_sr, rule, k=k)
    else:
        threshold = select_threshold(train_r, rule, percentile=percentile)
    d, r = reconstruction_costs(model, test_windows, metric, window_cost)
    return evaluate(test_windows, d, r, stats, threshold, rule)


def plot_regularity(
    report: RegularityReport, path: str | Path, title: str = "Regularity scores"
) -> Path:
    """Regularity-vs-window-index curve with the threshold line."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sr = [np.clip(rec.regularity, 0.0, 1.0) for rec in report.records]
    colors = ["tab:red" if rec.label == "anomalous" else "tab:blue" for rec in report.records]
    fig, ax = plt.subplots(figsize=(9, 4))
    ax.scatter(range(len(sr)), sr, c=colors, s=12, alpha=0.8)
    if report.threshold_rule is ThresholdRule.KTH_MIN_REGULARITY:
        ax.axhline(report.threshold, color="black", linestyle="--", linewidth=1,
                   label=f"threshold {report.threshold:.3f}")
        ax.legend(loc="lower left")
    ax.set_xlabel("window index")
    ax.set_ylabel("regularity score")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
