"""Pre-transfer analysis: similarity, maturity, availability.

Scores a (source, target) context pair level by level, then combines the
results into a single pre-transfer score

    score = S * M * A

where S is the similarity index (matching levels / 11), M the maturity
factor derived from the source's publication and performance ranks, and A
the 0/1 availability factor. A score above 0.5 marks a significant
overlap worth pursuing.

Three levels (AM model, ML model, ML preprocessing) are scored for
*applicability* rather than equality: source knowledge at these levels can
be adapted to a target that has none, so they count as 1 whenever the
source side is present. The default rule set is mechanical and
deliberately simple; analyst overrides are first-class because the
underlying component descriptors are free text.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

from .errors import ValidationError
from .knowledge import (
    LEVEL_ORDER,
    LEVEL_TITLES,
    KnowledgeContext,
    KnowledgeLevel,
)

#: Levels scored 1 whenever the source has adaptable knowledge, even if the
#: target side is empty or different.
APPLICABILITY_LEVELS = frozenset(
    {KnowledgeLevel.AM_MODEL, KnowledgeLevel.ML_MODEL, KnowledgeLevel.ML_PREPROCESSING}
)

KC_TOTAL = len(LEVEL_ORDER)

#: Per-step decrement of the newness / performance scores as ranks worsen.
MATURITY_DECREMENT = 0.1
#: Lower bound keeping both scores inside (0, 1].
MATURITY_FLOOR = 0.1

SIGNIFICANT_ABOVE = 0.5
DISPLAY_DECIMALS = 2


def canonical(text: str) -> str:
    """Whitespace-collapsed, case-folded form used for value comparison."""
    return " ".join(text.split()).casefold()


@dataclass(frozen=True)
class ComponentScore:
    """0/1 similarity-or-applicability score for one knowledge level."""

    level: KnowledgeLevel
    score: int
    rationale: str

    def __post_init__(self) -> None:
        if self.score not in (0, 1):
            raise ValidationError(f"component score must be 0 or 1, got {self.score!r}")


class Maturity(NamedTuple):
    newness: float
    performance: float
    factor: float


def maturity(newness_rank: int, performance_rank: int) -> Maturity:
    """Newness/performance scores and their mean, from 1-based ranks.

    Rank 1 scores 1.0 and every further rank subtracts 0.1, floored at 0.1
    so the factor stays within (0, 1].
    """
    for name, rank in (("newness_rank", newness_rank), ("performance_rank", performance_rank)):
        if not isinstance(rank, int) or rank < 1:
            raise ValidationError(f"{name} must be a positive integer, got {rank!r}")
    n = max(1.0 - MATURITY_DECREMENT * (newness_rank - 1), MATURITY_FLOOR)
    p = max(1.0 - MATURITY_DECREMENT * (performance_rank - 1), MATURITY_FLOOR)
    return Maturity(n, p, (n + p) / 2.0)


def _normalize_overrides(
    overrides: Mapping[KnowledgeLevel | str, int] | None,
) -> dict[KnowledgeLevel, int]:
    result: dict[KnowledgeLevel, int] = {}
    for key, value in (overrides or {}).items():
        try:
            level = KnowledgeLevel(key)
        except ValueError:
            raise ValidationError(f"override key {key!r} is not a knowledge level") from None
        if value not in (0, 1):
            raise ValidationError(
                f"override for {level.value} must be 0 or 1, got {value!r}"
            )
        result[level] = value
    return result


def compare_components(
    source: KnowledgeContext,
    target: KnowledgeContext,
    overrides: Mapping[KnowledgeLevel | str, int] | None = None,
) -> list[ComponentScore]:
    """Score all 11 levels of a (source, target) pair.

    Default rule: equality levels score 1 iff both sides are present and
    their canonical values match; applicability levels score 1 iff the
    source side is present. ``overrides`` replaces the default for the
    given levels and is recorded in the rationale.
    """
    override_map = _normalize_overrides(overrides)
    scores: list[ComponentScore] = []
    for level in LEVEL_ORDER:
        src = source.components[level]
        tgt = target.components[level]
        if level in override_map:
            scores.append(
                ComponentScore(level, override_map[level], "analyst override")
            )
            continue
        if level in APPLICABILITY_LEVELS:
            if src.present:
                score, why = 1, "source knowledge at this level is adaptable to the target"
            else:
                score, why = 0, "no source knowledge to adapt"
        elif not src.present or not tgt.present:
            missing = "source" if not src.present else "target"
            score, why = 0, f"knowledge absent in {missing}"
        elif canonical(src.value) == canonical(tgt.value):
            score, why = 1, "source and target values match"
        else:
            score, why = 0, "source and target values differ"
        scores.append(ComponentScore(level, score, why))
    return scores


@dataclass
class PreTransferReport:
    """Full pre-transfer analysis for one (source, target) pair.

    Stored values keep full precision; rounding to 2 decimals happens only
    in rendered/display fields.
    """

    source_id: str
    target_id: str
    component_scores: list[ComponentScore]
    similarity_index: float
    newness_score: float
    performance_score: float
    maturity_factor: float
    availability_factor: int
    pre_transfer_score: float
    significant: bool
    kc_total: int = KC_TOTAL
    notes: list[str] = field(default_factory=list)

    @property
    def am_similarity(self) -> int:
        return sum(s.score for s in self.component_scores[:6])

    @property
    def ml_similarity(self) -> int:
        return sum(s.score for s in self.component_scores[6:])

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "source_id": self.source_id,
            "target_id": self.target_id,
            "component_scores": [
                {"level": s.level.value, "score": s.score, "rationale": s.rationale}
                for s in self.component_scores
            ],
            "am_similarity": self.am_similarity,
            "ml_similarity": self.ml_similarity,
            "kc_total": self.kc_total,
            "similarity_index": self.similarity_index,
            "similarity_index_display": round(self.similarity_index, DISPLAY_DECIMALS),
            "newness_score": self.newness_score,
            "performance_score": self.performance_score,
            "maturity_factor": self.maturity_factor,
            "availability_factor": self.availability_factor,
            "pre_transfer_score": self.pre_transfer_score,
            "pre_transfer_score_display": round(self.pre_transfer_score, DISPLAY_DECIMALS),
            "significant": self.significant,
            "notes": list(self.notes),
        }


def pretransfer_score(
    source: KnowledgeContext,
    target: KnowledgeContext,
    overrides: Mapping[KnowledgeLevel | str, int] | None = None,
) -> PreTransferReport:
    """Assemble the full pre-transfer report for one pair."""
    scores = compare_components(source, target, overrides)
    similarity = sum(s.score for s in scores) / KC_TOTAL
    n, p, m = maturity(source.publication_rank, source.performance_rank)
    availability = 1 if source.artifacts_available else 0
    total = similarity * m * availability
    return PreTransferReport(
        source_id=source.context_id,
        target_id=target.context_id,
        component_scores=scores,
        similarity_index=similarity,
        newness_score=n,
        performance_score=p,
        maturity_factor=m,
        availability_factor=availability,
        pre_transfer_score=total,
        significant=total > SIGNIFICANT_ABOVE,
    )


def rank_sources(
    sources: Sequence[KnowledgeContext],
    target: KnowledgeContext,
    overrides: Mapping[str, Mapping[KnowledgeLevel | str, int]] | None = None,
) -> list[PreTransferReport]:
    """Score every candidate source against ``target`` and sort them.

    Descending by pre-transfer score, ties broken by higher similarity
    index, then by source context_id, so the order is deterministic.
    ``overrides`` may carry per-source override maps keyed by context_id.
    """
    if not sources:
        raise ValueError("rank_sources needs at least one source context")
    reports = [
        pretransfer_score(src, target, (overrides or {}).get(src.context_id))
        for src in sources
    ]
    reports.sort(
        key=lambda r: (-r.pre_transfer_score, -r.similarity_index, r.source_id)
    )
    return reports


def _display_value(ctx: KnowledgeContext, level: KnowledgeLevel) -> str:
    comp = ctx.components[level]
    return comp.value if comp.present else "None"


def render_report_table(
    report: PreTransferReport,
    source: KnowledgeContext,
    target: KnowledgeContext,
) -> str:
    """Human-readable comparison table (one row per knowledge level)."""
    headers = ("Knowledge Component", "Source", "Target", "Score", "Rationale")
    rows = []
    for cs in report.component_scores:
        rows.append(
            (
                LEVEL_TITLES[cs.level],
                _display_value(source, cs.level),
                _display_value(target, cs.level),
                str(cs.score),
                cs.rationale,
            )
        )
    widths = [
        max(len(headers[i]), *(len(r[i]) for r in rows)) for i in range(len(headers))
    ]

    def fmt(row: Iterable[str]) -> str:
        return "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()

    lines = [fmt(headers), fmt("-" * w for w in widths)]
    lines.extend(fmt(r) for r in rows)
    lines.append("")
    lines.append(
        f"Similarity index S = ({report.am_similarity} + {report.ml_similarity})"
        f"/{report.kc_total} = {round(report.similarity_index, DISPLAY_DECIMALS)}"
    )
    lines.append(
        f"Maturity factor M = (n + p)/2 = ({report.newness_score} + "
        f"{report.performance_score})/2 = {round(report.maturity_factor, DISPLAY_DECIMALS)}"
    )
    lines.append(f"Availability factor A = {report.availability_factor}")
    lines.append(
        f"Pre-transfer score S*M*A = {round(report.pre_transfer_score, DISPLAY_DECIMALS)}"
        f" ({'significant' if report.significant else 'not significant'})"
    )
    return "\n".join(lines)
