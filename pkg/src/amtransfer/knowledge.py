"""Featurized knowledge contexts for data-driven AM solutions.

A context describes one machine-learning-aided additive-manufacturing
solution through eleven ordered knowledge levels: six AM levels (process,
material, system, model, activity, concern) and five ML levels (task,
model, input, preprocessing, output). Contexts are plain value objects
serialized to a fixed JSON schema (``schema_version: 1``), so they can be
diffed, golden-tested and exchanged between tools.

Absent knowledge (a level the solution simply does not have) is stored as
an explicit ``present: false`` marker rather than a missing key, which
keeps pairwise comparison total.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping

from .errors import ValidationError

SCHEMA_VERSION = 1


class KnowledgeLevel(str, Enum):
    """The eleven knowledge levels, ordered from AM process to ML output."""

    AM_PROCESS = "AM_P"
    AM_MATERIAL = "AM_MT"
    AM_SYSTEM = "AM_S"
    AM_MODEL = "AM_M"
    AM_ACTIVITY = "AM_A"
    AM_CONCERN = "AM_C"
    ML_TASK = "ML_T"
    ML_MODEL = "ML_M"
    ML_INPUT = "ML_I"
    ML_PREPROCESSING = "ML_P"
    ML_OUTPUT = "ML_O"


LEVEL_ORDER: tuple[KnowledgeLevel, ...] = tuple(KnowledgeLevel)
AM_LEVELS: tuple[KnowledgeLevel, ...] = LEVEL_ORDER[:6]
ML_LEVELS: tuple[KnowledgeLevel, ...] = LEVEL_ORDER[6:]

LEVEL_TITLES: dict[KnowledgeLevel, str] = {
    KnowledgeLevel.AM_PROCESS: "AM Process",
    KnowledgeLevel.AM_MATERIAL: "AM Material",
    KnowledgeLevel.AM_SYSTEM: "AM System",
    KnowledgeLevel.AM_MODEL: "AM Model",
    KnowledgeLevel.AM_ACTIVITY: "AM Activity",
    KnowledgeLevel.AM_CONCERN: "AM Concern",
    KnowledgeLevel.ML_TASK: "ML Task",
    KnowledgeLevel.ML_MODEL: "ML Model",
    KnowledgeLevel.ML_INPUT: "ML Input",
    KnowledgeLevel.ML_PREPROCESSING: "ML Preprocessing",
    KnowledgeLevel.ML_OUTPUT: "ML Output",
}


def _as_level(value: KnowledgeLevel | str, where: str) -> KnowledgeLevel:
    try:
        return KnowledgeLevel(value)
    except ValueError:
        raise ValidationError(f"{where}: unknown level_id {value!r}") from None


@dataclass(frozen=True)
class KnowledgeComponent:
    """One knowledge level of a context.

    ``value`` is the canonical descriptor used for similarity comparison
    (e.g. ``"LPBF"``); finer structured facts (detector type, frame rate,
    feedstock, ...) go into ``attributes``. An absent component has
    ``present=False`` and carries no value or attributes.
    """

    level: KnowledgeLevel
    value: str = ""
    attributes: Mapping[str, str] = field(default_factory=dict)
    present: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "level", _as_level(self.level, "component"))
        object.__setattr__(self, "attributes", dict(self.attributes))
        if self.present:
            if not self.value:
                raise ValidationError(
                    f"component {self.level.value}: present component needs a non-empty value"
                )
        else:
            if self.value or self.attributes:
                raise ValidationError(
                    f"component {self.level.value}: absent component must have empty "
                    "value and attributes"
                )

    @classmethod
    def absent(cls, level: KnowledgeLevel | str) -> "KnowledgeComponent":
        return cls(level=_as_level(level, "component"), present=False)


@dataclass
class KnowledgeContext:
    """A complete 11-level description of one data-driven AM solution.

    ``publication_rank`` and ``performance_rank`` order this context among
    the candidate sources under consideration (1 = most recent / best
    performing); they feed the maturity factor. ``artifacts_available``
    states whether the data and model behind the context can actually be
    obtained, which gates the availability factor.
    """

    context_id: str
    components: dict[KnowledgeLevel, KnowledgeComponent]
    artifacts_available: bool = True
    publication_rank: int = 1
    performance_rank: int = 1

    def __post_init__(self) -> None:
        if not isinstance(self.context_id, str) or not self.context_id:
            raise ValidationError("context_id: must be a non-empty string")
        normalized: dict[KnowledgeLevel, KnowledgeComponent] = {}
        for key, comp in self.components.items():
            level = _as_level(key, f"context {self.context_id}")
            if comp.level != level:
                raise ValidationError(
                    f"context {self.context_id}: component stored under {level.value} "
                    f"declares level {comp.level.value}"
                )
            normalized[level] = comp
        missing = [lv.value for lv in LEVEL_ORDER if lv not in normalized]
        if missing:
            raise ValidationError(
                f"context {self.context_id}: missing levels {', '.join(missing)}"
            )
        if len(normalized) != len(LEVEL_ORDER):
            raise ValidationError(
                f"context {self.context_id}: expected exactly {len(LEVEL_ORDER)} components"
            )
        self.components = {lv: normalized[lv] for lv in LEVEL_ORDER}
        for name in ("publication_rank", "performance_rank"):
            rank = getattr(self, name)
            if not isinstance(rank, int) or rank < 1:
                raise ValidationError(f"{name}: must be a positive integer, got {rank!r}")

    def component(self, level: KnowledgeLevel | str) -> KnowledgeComponent:
        return self.components[_as_level(level, "component lookup")]


def _reject_duplicate_keys(pairs):
    seen = {}
    for key, value in pairs:
        if key in seen:
            raise ValidationError(f"duplicate key {key!r} in document")
        seen[key] = value
    return seen


def context_to_document(ctx: KnowledgeContext) -> dict:
    """Serialize a context to its canonical JSON-ready document.

    Canonical form: absent components collapse to ``{"present": false}``;
    an empty attributes map is omitted.
    """
    components: dict[str, dict] = {}
    for level in LEVEL_ORDER:
        comp = ctx.components[level]
        if not comp.present:
            components[level.value] = {"present": False}
            continue
        entry: dict = {"value": comp.value}
        if comp.attributes:
            entry["attributes"] = dict(comp.attributes)
        components[level.value] = entry
    return {
        "schema_version": SCHEMA_VERSION,
        "context_id": ctx.context_id,
        "artifacts_available": ctx.artifacts_available,
        "publication_rank": ctx.publication_rank,
        "performance_rank": ctx.performance_rank,
        "components": components,
    }


def context_from_document(doc: Mapping) -> KnowledgeContext:
    """Validate and materialize a context document (all 11 levels required)."""
    if not isinstance(doc, Mapping):
        raise ValidationError("context document must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValidationError(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
    if "context_id" not in doc:
        raise ValidationError("context_id: missing")
    raw_components = doc.get("components")
    if not isinstance(raw_components, Mapping):
        raise ValidationError("components: missing or not an object")
    components: dict[KnowledgeLevel, KnowledgeComponent] = {}
    for key, entry in raw_components.items():
        level = _as_level(key, "components")
        if level in components:
            raise ValidationError(f"components: duplicate level {level.value}")
        if not isinstance(entry, Mapping):
            raise ValidationError(f"components.{level.value}: must be an object")
        if not entry.get("present", True):
            components[level] = KnowledgeComponent.absent(level)
        else:
            components[level] = KnowledgeComponent(
                level=level,
                value=entry.get("value", ""),
                attributes=entry.get("attributes", {}),
            )
    return KnowledgeContext(
        context_id=doc["context_id"],
        components=components,
        artifacts_available=bool(doc.get("artifacts_available", True)),
        publication_rank=doc.get("publication_rank", 1),
        performance_rank=doc.get("performance_rank", 1),
    )


def load_context(source: Mapping | str | Path) -> KnowledgeContext:
    """Load a context from a document mapping or a JSON file path."""
    if isinstance(source, Mapping):
        return context_from_document(source)
    path = Path(source)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read context file {path}: {exc}") from exc
    try:
        doc = json.loads(text, object_pairs_hook=_reject_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON in {path}: {exc}") from exc
    return context_from_document(doc)


def save_context(ctx: KnowledgeContext, path: str | Path | None = None) -> dict:
    """Serialize ``ctx``; optionally write it to ``path`` as JSON.

    Round-trips: ``load_context(save_context(ctx)) == ctx``.
    """
    doc = context_to_document(ctx)
    if path is not None:
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n",
                              encoding="utf-8")
    return doc


def bundled_context_path(name: str) -> Path:
    """Path of a context document shipped with the package (e.g. ``lpbf_nist``)."""
    here = Path(__file__).resolve().parent
    path = here / "data" / f"{name}.json"
    if not path.exists():
        raise ValidationError(f"no bundled context named {name!r}")
    return path


def load_bundled_context(name: str) -> KnowledgeContext:
    return load_context(bundled_context_path(name))
