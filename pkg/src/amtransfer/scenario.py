"""Transfer-learning scenario and method-family selection.

Builds domain and task descriptors for each context from its knowledge
components, compares the pair, and maps the (domain equal?, task equal?)
outcome onto one of four scenarios:

    equal domain, equal task        -> traditional ML (no transfer needed)
    equal domain, different task    -> inductive transfer
    different domain, equal task    -> transductive transfer
    different domain, different task-> unsupervised transfer

A method family is then chosen inside the scenario. The anchored choices
follow a small decision table; everything else falls back to a documented
default and is flagged as such in the plan notes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import DescriptorError
from .knowledge import KnowledgeContext, KnowledgeLevel
from .pretransfer import canonical


class Scenario(str, Enum):
    TRADITIONAL_ML = "traditional_ml"
    INDUCTIVE = "inductive"
    TRANSDUCTIVE = "transductive"
    UNSUPERVISED = "unsupervised"


class MethodFamily(str, Enum):
    INSTANCE_BASED = "instance_based"
    FEATURE_BASED = "feature_based"
    PARAMETER_BASED = "parameter_based"
    RELATIONAL_KNOWLEDGE_BASED = "relational_knowledge_based"


@dataclass(frozen=True)
class DomainDescriptor:
    """Feature space plus the factors shaping its marginal distribution."""

    feature_space: str
    marginal_factors: tuple[str, ...]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DomainDescriptor):
            return NotImplemented
        return (
            canonical(self.feature_space) == canonical(other.feature_space)
            and tuple(canonical(f) for f in self.marginal_factors)
            == tuple(canonical(f) for f in other.marginal_factors)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class TaskDescriptor:
    """Label space plus the factors shaping its conditional distribution."""

    label_space: str
    conditional_factors: tuple[str, ...]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TaskDescriptor):
            return NotImplemented
        return (
            canonical(self.label_space) == canonical(other.label_space)
            and tuple(canonical(f) for f in self.conditional_factors)
            == tuple(canonical(f) for f in other.conditional_factors)
        )

    __hash__ = None  # type: ignore[assignment]


def _component_value(ctx: KnowledgeContext, level: KnowledgeLevel) -> str:
    comp = ctx.components[level]
    return comp.value if comp.present else ""


def domain_of(ctx: KnowledgeContext) -> DomainDescriptor:
    """Domain descriptor: ML input type + process/material/system factors.

    The feature space is taken from the ML input component (its
    ``input_type`` attribute when set, its value otherwise); the marginal
    distribution is shaped by the AM process, material, and system.
    """
    ml_input = ctx.components[KnowledgeLevel.ML_INPUT]
    if not ml_input.present:
        raise DescriptorError(
            f"domain undefined without ML input (context {ctx.context_id!r})"
        )
    feature_space = ml_input.attributes.get("input_type", ml_input.value)
    marginals = tuple(
        _component_value(ctx, level)
        for level in (
            KnowledgeLevel.AM_PROCESS,
            KnowledgeLevel.AM_MATERIAL,
            KnowledgeLevel.AM_SYSTEM,
        )
    )
    return DomainDescriptor(feature_space=feature_space, marginal_factors=marginals)


def task_of(ctx: KnowledgeContext) -> TaskDescriptor:
    """Task descriptor: ML output label space + activity/concern factors."""
    ml_output = ctx.components[KnowledgeLevel.ML_OUTPUT]
    if not ml_output.present:
        raise DescriptorError(
            f"task undefined without ML output (context {ctx.context_id!r})"
        )
    conditionals = tuple(
        _component_value(ctx, level)
        for level in (KnowledgeLevel.AM_ACTIVITY, KnowledgeLevel.AM_CONCERN)
    )
    return TaskDescriptor(label_space=ml_output.value, conditional_factors=conditionals)


def target_labels_available(ctx: KnowledgeContext) -> bool:
    """True when the context's ML output declares labels_available=true."""
    ml_output = ctx.components[KnowledgeLevel.ML_OUTPUT]
    if not ml_output.present:
        return False
    flag = ml_output.attributes.get("labels_available", "false")
    return canonical(str(flag)) in ("true", "yes", "1")


SCENARIO_TABLE: dict[tuple[bool, bool], Scenario] = {
    (True, True): Scenario.TRADITIONAL_ML,
    (True, False): Scenario.INDUCTIVE,
    (False, True): Scenario.TRANSDUCTIVE,
    (False, False): Scenario.UNSUPERVISED,
}


@dataclass
class TransferPlan:
    """Scenario + method decision with the evidence that produced it."""

    source_id: str
    target_id: str
    source_domain: DomainDescriptor
    target_domain: DomainDescriptor
    source_task: TaskDescriptor
    target_task: TaskDescriptor
    domains_equal: bool
    tasks_equal: bool
    scenario: Scenario
    method_family: MethodFamily
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        def _domain(d: DomainDescriptor) -> dict:
            return {
                "feature_space": d.feature_space,
                "marginal_factors": list(d.marginal_factors),
            }

        def _task(t: TaskDescriptor) -> dict:
            return {
                "label_space": t.label_space,
                "conditional_factors": list(t.conditional_factors),
            }

        return {
            "schema_version": 1,
            "source_id": self.source_id,
            "target_id": self.target_id,
            "source_domain": _domain(self.source_domain),
            "target_domain": _domain(self.target_domain),
            "source_task": _task(self.source_task),
            "target_task": _task(self.target_task),
            "domains_equal": self.domains_equal,
            "tasks_equal": self.tasks_equal,
            "scenario": self.scenario.value,
            "method_family": self.method_family.value,
            "notes": list(self.notes),
        }


def _choose_method(
    scenario: Scenario,
    source: KnowledgeContext,
    target: KnowledgeContext,
    notes: list[str],
) -> MethodFamily:
    if scenario is Scenario.TRADITIONAL_ML:
        notes.append(
            "contexts share domain and task; train directly on the target,"
            " no transfer method needed (anchored)"
        )
        return MethodFamily.INSTANCE_BASED
    if scenario is Scenario.TRANSDUCTIVE:
        if source.components[KnowledgeLevel.ML_MODEL].present:
            notes.append(
                "transductive scenario with a trained source model available:"
                " reuse its parameters and adapt on unlabeled target data"
                " (anchored)"
            )
            return MethodFamily.PARAMETER_BASED
        notes.append(
            "transductive scenario without a source model: align feature"
            " representations across domains (default, unanchored)"
        )
        return MethodFamily.FEATURE_BASED
    if scenario is Scenario.INDUCTIVE:
        if target_labels_available(target):
            notes.append(
                "inductive scenario with labeled target data: start from"
                " source parameters and fine-tune on target labels (anchored)"
            )
            return MethodFamily.PARAMETER_BASED
        notes.append(
            "inductive scenario without target labels: reweight source"
            " instances toward the target task (default, unanchored)"
        )
        return MethodFamily.INSTANCE_BASED
    notes.append(
        "unsupervised scenario: learn a shared feature representation"
        " across both contexts (default, unanchored)"
    )
    return MethodFamily.FEATURE_BASED


def compare(
    source: KnowledgeContext,
    target: KnowledgeContext,
    method_overrides: dict[Scenario, MethodFamily] | None = None,
) -> TransferPlan:
    """Full scenario/method decision for a (source, target) pair.

    ``method_overrides`` replaces the method family chosen for the given
    scenario; the override is recorded in the plan notes.
    """
    source_domain = domain_of(source)
    target_domain = domain_of(target)
    source_task = task_of(source)
    target_task = task_of(target)
    domains_equal = source_domain == target_domain
    tasks_equal = source_task == target_task
    scenario = SCENARIO_TABLE[(domains_equal, tasks_equal)]

    notes: list[str] = []
    if not domains_equal:
        if canonical(source_domain.feature_space) != canonical(
            target_domain.feature_space
        ):
            notes.append("feature spaces differ")
        else:
            notes.append(
                "feature spaces match but marginal distributions differ"
                " (process/material/system)"
            )
    if not tasks_equal:
        if canonical(source_task.label_space) != canonical(target_task.label_space):
            notes.append("label spaces differ")
        else:
            notes.append("label spaces match but conditional factors differ")

    overrides = method_overrides or {}
    if scenario in overrides:
        method = overrides[scenario]
        notes.append(f"method family set by analyst override: {method.value}")
    else:
        method = _choose_method(scenario, source, target, notes)

    return TransferPlan(
        source_id=source.context_id,
        target_id=target.context_id,
        source_domain=source_domain,
        target_domain=target_domain,
        source_task=source_task,
        target_task=target_task,
        domains_equal=domains_equal,
        tasks_equal=tasks_equal,
        scenario=scenario,
        method_family=method,
        notes=notes,
    )
