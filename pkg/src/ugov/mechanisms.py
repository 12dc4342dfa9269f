"""Role-based mechanism pipeline: Observer, detectors, Constructor, Evolver,
Orchestrator, and Commander.

All operations here are pure transformations; the registry serializes their
effects. Detector rules and orchestration rules are configuration (loaded
from the policy document) that reference the named predicates/guards below,
so scenarios can register domain checks without code changes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Callable, Optional

from .errors import (
    InvalidKindError,
    MalformedInputError,
    PolicyViolationError,
    UnauthorizedActionError,
    UnknownTargetError,
    WrongStateError,
)
from .lifecycle import EventKind, LifecycleEvent, draft
from .model import (
    DEFAULT_CONFIDENCE,
    IRREDUCIBILITY_BY_FAMILY,
    MITIGATION_ACTION_KINDS,
    TERMINAL_STATES,
    ActionKind,
    Category,
    EvidenceItem,
    EvidenceSource,
    LifecycleState,
    OntologicalContext,
    Polarity,
    Provenance,
    UncertaintyKind,
    UncertaintyRecord,
    compute_risk,
    validate_kind,
)
from .policy import Policy, should_engage_human

if TYPE_CHECKING:  # pragma: no cover
    from .registry import RegistrySnapshot


class Layer(str, Enum):
    DATA = "Data"
    REASONING = "Reasoning"
    INTERACTION = "Interaction"
    OPERATIONAL = "Operational"


@dataclass(frozen=True)
class Signal:
    timestamp: int
    layer: Layer
    source_agent: str
    content: dict

    def to_json(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "layer": self.layer.value,
            "source_agent": self.source_agent,
            "content": self.content,
        }


_ENVELOPE_KEYS = ("layer", "agent")


def observe(raw, now: int) -> list[Signal]:
    """Normalize raw input (one message or a batch) into timestamped signals.

    A message missing a domain field it declares as required is *not* an
    error: the gap is recorded in `missing_fields` and becomes a signal for
    the completeness detector. Only a structurally unusable envelope raises.
    """
    messages = raw if isinstance(raw, list) else [raw]
    signals = []
    for message in messages:
        if not isinstance(message, dict):
            raise MalformedInputError(f"message must be an object, got {type(message).__name__}")
        try:
            layer = Layer(message.get("layer", Layer.DATA.value))
        except ValueError:
            raise MalformedInputError(f"unknown layer {message.get('layer')!r}") from None
        content = {k: v for k, v in message.items() if k not in _ENVELOPE_KEYS}
        fields = message.get("fields", {})
        required = message.get("required", [])
        if isinstance(fields, dict) and isinstance(required, list):
            missing = [name for name in required if name not in fields]
            if missing:
                content["missing_fields"] = missing
        signals.append(
            Signal(
                timestamp=now,
                layer=layer,
                source_agent=str(message.get("agent", "environment")),
                content=content,
            )
        )
    return signals


@dataclass(frozen=True)
class DetectorRule:
    id: str
    layer: Layer
    kind_emitted: UncertaintyKind
    predicate: str
    initial_confidence: float = DEFAULT_CONFIDENCE
    initial_severity: float = 0.5
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not validate_kind(
            self.kind_emitted.category, self.kind_emitted.family, self.kind_emitted.leaf
        ):
            raise InvalidKindError(f"detector rule {self.id} emits an illegal kind")
        if self.predicate not in PREDICATES:
            raise ValueError(f"detector rule {self.id}: unknown predicate {self.predicate!r}")

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "layer": self.layer.value,
            "kind_emitted": self.kind_emitted.to_json(),
            "predicate": self.predicate,
            "initial_confidence": self.initial_confidence,
            "initial_severity": self.initial_severity,
            "params": self.params,
        }

    @classmethod
    def from_json(cls, data: dict) -> "DetectorRule":
        return cls(
            id=data["id"],
            layer=Layer(data["layer"]),
            kind_emitted=UncertaintyKind.from_json(data["kind_emitted"]),
            predicate=data["predicate"],
            initial_confidence=data.get("initial_confidence", DEFAULT_CONFIDENCE),
            initial_severity=data.get("initial_severity", 0.5),
            params=dict(data.get("params", {})),
        )


@dataclass(frozen=True)
class DetectionContext:
    """Registry view for predicates that compare against governed state."""

    records: dict[str, UncertaintyRecord] = field(default_factory=dict)
    policy: Optional[Policy] = None


@dataclass(frozen=True)
class DetectionProposal:
    rule_id: str
    kind: UncertaintyKind
    confidence: float
    severity: float
    signal: Signal
    note: str = ""


# --- Detector predicates -------------------------------------------------
# Signature: (signal, rule, ctx) -> bool. Deterministic, side-effect free.


def _missing_required_fields(signal, rule, ctx) -> bool:
    return bool(signal.content.get("missing_fields"))


def _out_of_range_value(signal, rule, ctx) -> bool:
    ranges = rule.params.get("ranges", {})
    fields = signal.content.get("fields", {})
    for name, (lo, hi) in ranges.items():
        value = fields.get(name)
        if isinstance(value, (int, float)) and not lo <= value <= hi:
            return True
    return False


def _cross_source_inconsistency(signal, rule, ctx) -> bool:
    readings = signal.content.get("readings", [])
    values = [r.get("value") for r in readings if isinstance(r.get("value"), (int, float))]
    if len(values) < 2:
        return False
    return max(values) - min(values) > float(rule.params.get("tolerance", 0.0))


def _mean_shift(signal, rule, ctx) -> bool:
    # Threshold stand-in for a distributional shift indicator.
    field_name = rule.params.get("field")
    value = signal.content.get("fields", {}).get(field_name)
    if not isinstance(value, (int, float)):
        return False
    baseline = float(rule.params.get("baseline_mean", 0.0))
    return abs(value - baseline) > float(rule.params.get("shift_threshold", 0.0))


def _physical_noise(signal, rule, ctx) -> bool:
    return bool(signal.content.get("physical_noise"))


def _agent_divergence(signal, rule, ctx) -> bool:
    conclusions = {
        entry.get("conclusion")
        for entry in signal.content.get("conclusions", [])
        if entry.get("conclusion") is not None
    }
    return len(conclusions) >= 2


def _unsupported_conclusion(signal, rule, ctx) -> bool:
    return "conclusion" in signal.content and not signal.content.get("evidence_refs")


def _missing_tool_invocation(signal, rule, ctx) -> bool:
    required = set(signal.content.get("required_tools", []))
    invoked = set(signal.content.get("invoked_tools", []))
    return bool(required - invoked)


def _low_confidence_prediction(signal, rule, ctx) -> bool:
    # New conclusions only; re-assertions about an existing record are the
    # calibration predicate's business.
    if "conclusion" not in signal.content or "record" in signal.content:
        return False
    stated = signal.content.get("stated_confidence")
    if not isinstance(stated, (int, float)):
        return False
    return stated < float(rule.params.get("threshold", 0.9))


def _confidence_calibration_gap(signal, rule, ctx) -> bool:
    record_id = signal.content.get("record")
    stated = signal.content.get("stated_confidence")
    if record_id is None or not isinstance(stated, (int, float)):
        return False
    record = ctx.records.get(record_id)
    if record is None:
        return False
    delta = (
        ctx.policy.calibration_delta
        if ctx.policy is not None
        else float(rule.params.get("delta", 0.25))
    )
    return abs(stated - record.confidence) > delta


def _ambiguous_term(signal, rule, ctx) -> bool:
    text = str(signal.content.get("text", ""))
    terms = rule.params.get("terms", [])
    return any(term.lower() in text.lower() for term in terms)


def _schema_violation(signal, rule, ctx) -> bool:
    return bool(signal.content.get("schema_errors"))


def _concurrency_conflict(signal, rule, ctx) -> bool:
    return bool(signal.content.get("conflict"))


def _feedback_loop(signal, rule, ctx) -> bool:
    return bool(signal.content.get("loop_detected"))


def _handoff_information_loss(signal, rule, ctx) -> bool:
    return bool(signal.content.get("dropped_fields"))


def _human_override_rate(signal, rule, ctx) -> bool:
    overrides = signal.content.get("overrides")
    window = signal.content.get("window")
    if not isinstance(overrides, int) or not isinstance(window, int) or window <= 0:
        return False
    return overrides / window > float(rule.params.get("rate_threshold", 0.3))


def _repeated_escalations(signal, rule, ctx) -> bool:
    count = signal.content.get("escalation_count")
    return isinstance(count, int) and count > int(rule.params.get("count_threshold", 3))


def _infrastructure_change(signal, rule, ctx) -> bool:
    kinds = rule.params.get("kinds", ["model_swap", "scale_event", "pipeline_update"])
    return signal.content.get("change_kind") in kinds


_HEDGES = ("maybe", "possibly", "might", "unsure", "not sure", "unclear", "uncertain whether")


def _hedged_justification(signal, rule, ctx) -> bool:
    if signal.content.get("role") != "Interpretation":
        return False
    text = str(signal.content.get("justification", "")).lower()
    return any(h in text for h in _HEDGES)


PREDICATES: dict[str, Callable] = {
    "missing-required-fields": _missing_required_fields,
    "out-of-range-value": _out_of_range_value,
    "cross-source-inconsistency": _cross_source_inconsistency,
    "mean-shift": _mean_shift,
    "physical-noise": _physical_noise,
    "agent-divergence": _agent_divergence,
    "unsupported-conclusion": _unsupported_conclusion,
    "missing-tool-invocation": _missing_tool_invocation,
    "low-confidence-prediction": _low_confidence_prediction,
    "confidence-calibration-gap": _confidence_calibration_gap,
    "ambiguous-term": _ambiguous_term,
    "schema-violation": _schema_violation,
    "concurrency-conflict": _concurrency_conflict,
    "feedback-loop": _feedback_loop,
    "handoff-information-loss": _handoff_information_loss,
    "human-override-rate": _human_override_rate,
    "repeated-escalations": _repeated_escalations,
    "infrastructure-change": _infrastructure_change,
    "hedged-justification": _hedged_justification,
}


def register_predicate(name: str, fn: Callable) -> None:
    """Plug-in hook: scenarios may register extra named checks."""
    PREDICATES[name] = fn


def detect(
    signal: Signal,
    rules: list[DetectorRule] | tuple[DetectorRule, ...],
    ctx: DetectionContext | None = None,
) -> list[DetectionProposal]:
    """One proposal per matching rule, in rule order."""
    ctx = ctx or DetectionContext()
    proposals = []
    for rule in rules:
        if rule.layer is not signal.layer:
            continue
        if PREDICATES[rule.predicate](signal, rule, ctx):
            confidence = rule.initial_confidence
            source_key = rule.params.get("confidence_from")
            if source_key and isinstance(signal.content.get(source_key), (int, float)):
                confidence = float(signal.content[source_key])
            proposals.append(
                DetectionProposal(
                    rule_id=rule.id,
                    kind=rule.kind_emitted,
                    confidence=confidence,
                    severity=rule.initial_severity,
                    signal=signal,
                    note=str(signal.content.get("conclusion", ""))
                    or str(signal.content.get("change_kind", ""))
                    or rule.id,
                )
            )
    return proposals


def construct(
    proposal: DetectionProposal,
    provenance: Provenance,
    record_id: str,
    belief_statement: str = "",
    belief_agent: str = "",
    topic: str = "",
) -> UncertaintyRecord:
    """Instantiate a Detected record from a detection proposal.

    The triggering signal is attached as the record's first evidence item
    (neutral, weight 0: it motivates detection without shifting the prior)
    so the full detection context survives in the log.
    """
    ontological_ctx = None
    if proposal.kind.category is Category.ONTOLOGICAL:
        ontological_ctx = OntologicalContext(
            indeterminacy_source=proposal.note or proposal.rule_id,
            irreducibility=IRREDUCIBILITY_BY_FAMILY[proposal.kind.family],
        )
    from . import canonical

    trigger = EvidenceItem(
        id=f"sig-{record_id}",
        timestamp=proposal.signal.timestamp,
        source=(
            EvidenceSource.OBSERVATION
            if proposal.signal.layer in (Layer.DATA, Layer.OPERATIONAL)
            else EvidenceSource.AGENT_REASONING
        ),
        polarity=Polarity.NEUTRAL,
        weight=0.0,
        payload=canonical.dumps(proposal.signal.content),
        origin_agent=proposal.signal.source_agent,
    )
    record = UncertaintyRecord(
        id=record_id,
        kind=proposal.kind,
        ontological_ctx=ontological_ctx,
        provenance=provenance,
        evidence=(trigger,),
        confidence=proposal.confidence,
        risk=compute_risk(proposal.severity, 0.0),
        state=LifecycleState.DETECTED,
        belief_statement=belief_statement or proposal.note,
        belief_agent=belief_agent or proposal.signal.source_agent,
        topic=topic or str(proposal.signal.content.get("topic", "")),
        annotations={"detector_rule": proposal.rule_id},
    )
    record.validate()
    return record


def characterize(record: UncertaintyRecord, assessment: dict) -> LifecycleEvent:
    """Event draft completing formal characterization of a Detected record.

    assessment keys: scope (list), severity, likelihood, expiry (optional),
    annotations (optional). Dependency links are established separately by
    the registry so they appear as their own log entries.
    """
    if record.state is not LifecycleState.DETECTED:
        raise WrongStateError(
            f"record {record.id} is {record.state.value}; only Detected records"
            " can be characterized"
        )
    payload = {
        "scope": sorted(assessment.get("scope", [])),
        "severity": assessment["severity"],
        "likelihood": assessment["likelihood"],
        "expiry": assessment.get("expiry"),
        "annotations": dict(assessment.get("annotations", {})),
    }
    return draft(EventKind.CHARACTERIZATION_COMPLETED, record.id, payload=payload)


# --- Evolver --------------------------------------------------------------

_LOGIT_CLAMP = 1e-6

_POLARITY_SIGN = {Polarity.SUPPORTING: 1.0, Polarity.CONFLICTING: -1.0, Polarity.NEUTRAL: 0.0}


def fuse_confidence(confidence: float, items) -> float:
    """Log-odds fusion: additive, order-independent, bounded in (0, 1)."""
    shift = sum(item.weight * _POLARITY_SIGN[item.polarity] for item in items)
    if shift == 0.0:
        return confidence
    clamped = min(max(confidence, _LOGIT_CLAMP), 1.0 - _LOGIT_CLAMP)
    z = math.log(clamped / (1.0 - clamped)) + shift
    return 1.0 / (1.0 + math.exp(-z))


def evolve(record: UncertaintyRecord, event: LifecycleEvent) -> UncertaintyRecord:
    """Fold an event's payload into confidence, risk, and the evidence list.

    Confidence moves only through evidence fusion. Severity and likelihood
    move only through explicit re-assessment payloads (plus the monotone
    `min_likelihood` floor that propagation raises).
    """
    if event.kind is EventKind.EVIDENCE_ACCUMULATED:
        items = tuple(EvidenceItem.from_json(e) for e in event.payload.get("evidence", ()))
        confidence = fuse_confidence(record.confidence, items)
        severity = event.payload.get("severity", record.risk.severity)
        likelihood = event.payload.get("likelihood", record.risk.likelihood)
        floor = event.payload.get("min_likelihood")
        if floor is not None:
            likelihood = max(likelihood, floor)
        risk = record.risk
        if severity != record.risk.severity or likelihood != record.risk.likelihood:
            risk = compute_risk(severity, likelihood)
        return record.with_changes(
            confidence=confidence, risk=risk, evidence=record.evidence + items
        )

    if event.kind is EventKind.CHARACTERIZATION_COMPLETED:
        payload = event.payload
        annotations = dict(record.annotations)
        annotations.update(payload.get("annotations", {}))
        scope = frozenset(payload.get("scope", []))
        if not scope:
            # Empty scope is legal but worth surfacing during audits.
            annotations["characterization_warning"] = "empty-scope"
        return record.with_changes(
            scope=scope,
            risk=compute_risk(payload["severity"], payload["likelihood"]),
            expiry=payload.get("expiry", record.expiry),
            annotations=annotations,
        )

    if event.kind is EventKind.TIMER_ELAPSED:
        item = EvidenceItem(
            id=f"{event.id}.timer",
            timestamp=event.timestamp,
            source=EvidenceSource.TIMER_EXPIRATION,
            polarity=Polarity.NEUTRAL,
            weight=0.0,
            payload=f"validity deadline {event.payload.get('expiry')} reached",
            origin_agent="timer",
        )
        return record.with_changes(evidence=record.evidence + (item,))

    return record


# --- Orchestrator ---------------------------------------------------------


@dataclass(frozen=True)
class HandlingAction:
    id: str
    target: str
    kind: ActionKind
    parameters: dict = field(default_factory=dict)
    authorized_by: str = ""

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "target": self.target,
            "kind": self.kind.value,
            "parameters": self.parameters,
            "authorized_by": self.authorized_by,
        }

    @classmethod
    def from_json(cls, data: dict) -> "HandlingAction":
        return cls(
            id=data["id"],
            target=data["target"],
            kind=ActionKind(data["kind"]),
            parameters=dict(data.get("parameters", {})),
            authorized_by=data.get("authorized_by", ""),
        )


def _g_needs_mitigation(record, snapshot, policy) -> bool:
    return record.state is LifecycleState.CHARACTERIZED


def _g_family(family_name: str):
    def guard(record, snapshot, policy) -> bool:
        return (
            record.state is LifecycleState.CHARACTERIZED
            and record.kind.family.value == family_name
        )

    return guard


def _g_divergent_prediction(record, snapshot, policy) -> bool:
    return (
        record.state is LifecycleState.CHARACTERIZED
        and record.kind.leaf.value == "Prediction"
    )


def _g_risk_above_escalation(record, snapshot, policy) -> bool:
    return record.state is LifecycleState.MITIGATED and record.risk.risk > policy.theta_esc


def _g_hitl_trigger(record, snapshot, policy) -> bool:
    return (
        record.state is LifecycleState.MITIGATED
        and should_engage_human(record, snapshot, policy) is not None
    )


ORCHESTRATION_GUARDS: dict[str, Callable] = {
    "needs-mitigation": _g_needs_mitigation,
    "needs-mitigation-data": _g_family("Data"),
    "needs-mitigation-divergent": _g_divergent_prediction,
    "needs-mitigation-interpretational": _g_family("Interpretational"),
    "needs-bounding-morphing": _g_family("ArchitecturalMorphing"),
    "needs-bounding-interaction": _g_family("Interaction"),
    "risk-above-escalation": _g_risk_above_escalation,
    "hitl-trigger": _g_hitl_trigger,
}


def orchestrate(snapshot: "RegistrySnapshot", policy: Policy) -> list[HandlingAction]:
    """Pure, deterministic action selection over a snapshot.

    Ordering: record id, then rule priority. Per record, only the first
    mitigation-class action survives (the rules are alternatives) and any
    kind outside the autonomy scope is replaced by a NotifyHuman hand-off.
    """
    actions: list[HandlingAction] = []
    rules = sorted(policy.orchestration_rules, key=lambda r: (r.priority, r.id))
    for record_id in sorted(snapshot.records):
        record = snapshot.records[record_id]
        if record.state in TERMINAL_STATES:
            continue
        seen_kinds: set[ActionKind] = set()
        mitigation_taken = False
        for rule in rules:
            if not ORCHESTRATION_GUARDS[rule.guard](record, snapshot, policy):
                continue
            kind = rule.action
            parameters = dict(rule.parameters)
            if kind in MITIGATION_ACTION_KINDS:
                if mitigation_taken:
                    continue
                mitigation_taken = True
            if kind not in policy.autonomy_scope:
                parameters["requested_kind"] = kind.value
                kind = ActionKind.NOTIFY_HUMAN
            if kind in seen_kinds:
                continue
            seen_kinds.add(kind)
            actions.append(
                HandlingAction(
                    id=f"{rule.id}@{record.id}@t{snapshot.now}",
                    target=record.id,
                    kind=kind,
                    parameters=parameters,
                    authorized_by=rule.id,
                )
            )
    return actions


# --- Commander ------------------------------------------------------------


def execute(
    action: HandlingAction, snapshot: "RegistrySnapshot", policy: Policy
) -> list[LifecycleEvent]:
    """Authorization-gated translation of a handling action into events.

    Authorization comes either from a policy rule (kind must then sit inside
    the autonomy scope) or from a human grant recorded in the audit log.
    Forged authorizations never reach the registry.
    """
    human_granted = snapshot.human_grants.get(action.id) == action.authorized_by
    if action.authorized_by in policy.rule_ids():
        if action.kind not in policy.autonomy_scope:
            raise PolicyViolationError(
                f"action kind {action.kind.value} is outside the autonomy scope"
            )
    elif not human_granted:
        raise UnauthorizedActionError(
            f"action {action.id} has no valid authorization ({action.authorized_by!r})"
        )

    record = snapshot.records.get(action.target)
    if record is None:
        raise UnknownTargetError(f"action targets unknown record {action.target!r}")
    if record.state in TERMINAL_STATES:
        return []

    note_payload = {
        "evidence": [],
        "note": f"handling action {action.kind.value} executed",
        "action": action.to_json(),
    }
    if action.kind is ActionKind.ESCALATE:
        if record.state is not LifecycleState.MITIGATED:
            return []
        return [
            draft(
                EventKind.ORCHESTRATOR_ESCALATION,
                record.id,
                payload={"action": action.to_json()},
                actor=action.authorized_by,
            )
        ]
    if action.kind in MITIGATION_ACTION_KINDS and record.state is LifecycleState.CHARACTERIZED:
        return [
            draft(
                EventKind.MITIGATION_INITIATED,
                record.id,
                payload={"action": action.to_json()},
                actor=action.authorized_by,
            )
        ]
    return [
        draft(
            EventKind.EVIDENCE_ACCUMULATED,
            record.id,
            payload=note_payload,
            actor=action.authorized_by,
        )
    ]
