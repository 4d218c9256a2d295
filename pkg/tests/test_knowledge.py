"""Context schema: construction, validation, serialization round-trips."""

import pytest

from amtransfer.errors import ValidationError
from amtransfer.knowledge import (
    AM_LEVELS,
    LEVEL_ORDER,
    ML_LEVELS,
    KnowledgeComponent,
    KnowledgeContext,
    KnowledgeLevel,
    context_from_document,
    context_to_document,
    load_context,
    save_context,
)


def full_components(**values):
    comps = {}
    for level in LEVEL_ORDER:
        value = values.get(level.value, f"v_{level.value}")
        if value is None:
            comps[level] = KnowledgeComponent.absent(level)
        else:
            comps[level] = KnowledgeComponent(level=level, value=value)
    return comps


def test_level_partition():
    assert len(LEVEL_ORDER) == 11
    assert len(AM_LEVELS) == 6
    assert len(ML_LEVELS) == 5
    assert set(AM_LEVELS) | set(ML_LEVELS) == set(LEVEL_ORDER)


def test_context_requires_all_levels():
    comps = full_components()
    del comps[KnowledgeLevel.ML_OUTPUT]
    with pytest.raises(ValidationError, match="missing levels"):
        KnowledgeContext(context_id="x", components=comps)


def test_present_component_needs_value():
    with pytest.raises(ValidationError, match="non-empty value"):
        KnowledgeComponent(level=KnowledgeLevel.AM_PROCESS, value="")


def test_absent_component_rejects_payload():
    with pytest.raises(ValidationError, match="absent component"):
        KnowledgeComponent(level=KnowledgeLevel.AM_PROCESS, value="LPBF", present=False)


def test_rank_validation():
    with pytest.raises(ValidationError, match="publication_rank"):
        KnowledgeContext(
            context_id="x", components=full_components(), publication_rank=0
        )


def test_document_round_trip(tmp_path):
    ctx = KnowledgeContext(
        context_id="roundtrip",
        components=full_components(AM_M=None),
        artifacts_available=False,
        publication_rank=2,
        performance_rank=3,
    )
    path = tmp_path / "ctx.json"
    save_context(ctx, path)
    loaded = load_context(path)
    assert loaded == ctx
    assert not loaded.components[KnowledgeLevel.AM_MODEL].present


def test_absent_collapses_in_document():
    ctx = KnowledgeContext(context_id="x", components=full_components(ML_M=None))
    doc = context_to_document(ctx)
    assert doc["components"]["ML_M"] == {"present": False}


def test_schema_version_enforced():
    ctx = KnowledgeContext(context_id="x", components=full_components())
    doc = context_to_document(ctx)
    doc["schema_version"] = 99
    with pytest.raises(ValidationError, match="schema_version"):
        context_from_document(doc)


def test_unknown_level_rejected():
    ctx = KnowledgeContext(context_id="x", components=full_components())
    doc = context_to_document(ctx)
    doc["components"]["AM_X"] = {"value": "?"}
    with pytest.raises(ValidationError, match="unknown level_id"):
        context_from_document(doc)


def test_duplicate_json_keys_rejected(tmp_path):
    ctx = KnowledgeContext(context_id="x", components=full_components())
    doc = context_to_document(ctx)
    import json

    text = json.dumps(doc)
    text = text.replace('"context_id": "x"', '"context_id": "x", "context_id": "y"', 1)
    path = tmp_path / "dup.json"
    path.write_text(text)
    with pytest.raises(ValidationError, match="duplicate key"):
        load_context(path)


def test_bundled_contexts_load(lpbf_context, ded_context):
    assert lpbf_context.components[KnowledgeLevel.AM_PROCESS].value == "LPBF"
    assert ded_context.components[KnowledgeLevel.AM_PROCESS].value == "DED"
    assert lpbf_context.artifacts_available
