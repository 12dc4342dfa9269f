"""Six-state lifecycle engine: the event-driven transition function.

The transition table is data (`TRANSITION_TABLE`), guards are named
predicates, and `transition` is a pure function of (record, event, policy):
everything stateful lives in the registry. Guards evaluate against the record
*after* the event's evidence has been folded in, paired with the pre-event
record so "decreased" guards can compare.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Callable, Iterable, Optional

from .canonical import FORMAT_VERSION
from .errors import (
    IllegalResolutionError,
    TargetMismatchError,
    TerminalStateError,
)
from .model import (
    TERMINAL_STATES,
    Category,
    LifecycleState,
    UncertaintyRecord,
)

if TYPE_CHECKING:  # pragma: no cover
    from .policy import Policy

from enum import Enum


class EventKind(str, Enum):
    # Lifecycle events: the inputs of the transition function.
    CHARACTERIZATION_COMPLETED = "CharacterizationCompleted"
    MITIGATION_INITIATED = "MitigationInitiated"
    EVIDENCE_ACCUMULATED = "EvidenceAccumulated"
    DECISION_COMMITTED = "DecisionCommitted"
    ORCHESTRATOR_ESCALATION = "OrchestratorEscalation"
    HUMAN_DECISION = "HumanDecision"
    TIMER_ELAPSED = "TimerElapsed"
    # Structural events: registry bookkeeping, never routed through the
    # transition table but part of the replayable log.
    RECORD_CREATED = "RecordCreated"
    DEPENDENCY_LINKED = "DependencyLinked"
    TASK_CLAIMED = "TaskClaimed"
    TICK_ADVANCED = "TickAdvanced"


LIFECYCLE_EVENT_KINDS = (
    EventKind.CHARACTERIZATION_COMPLETED,
    EventKind.MITIGATION_INITIATED,
    EventKind.EVIDENCE_ACCUMULATED,
    EventKind.DECISION_COMMITTED,
    EventKind.ORCHESTRATOR_ESCALATION,
    EventKind.HUMAN_DECISION,
    EventKind.TIMER_ELAPSED,
)

# Human decision verbs carried in HUMAN_DECISION payloads.
DECISION_RESOLVE = "resolve"
DECISION_ACCEPT_RISK = "accept-risk"
DECISION_REQUEST_MORE_EVIDENCE = "request-more-evidence"
DECISION_AUTHORIZE_ADAPTATION = "authorize-adaptation"


@dataclass(frozen=True)
class LifecycleEvent:
    """One entry of the append-only log. id 0 means "not yet stamped"."""

    id: int
    timestamp: int
    target: str
    kind: EventKind
    payload: dict
    actor: str = ""

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "timestamp": self.timestamp,
            "target": self.target,
            "kind": self.kind.value,
            "payload": self.payload,
            "actor": self.actor,
        }

    @classmethod
    def from_json(cls, data: dict) -> "LifecycleEvent":
        return cls(
            id=data["id"],
            timestamp=data["timestamp"],
            target=data["target"],
            kind=EventKind(data["kind"]),
            payload=data.get("payload", {}),
            actor=data.get("actor", ""),
        )


def draft(
    kind: EventKind, target: str, payload: dict | None = None, actor: str = "", timestamp: int = -1
) -> LifecycleEvent:
    """An event awaiting id/timestamp assignment by the registry."""
    return LifecycleEvent(
        id=0, timestamp=timestamp, target=target, kind=kind, payload=payload or {}, actor=actor
    )


GuardFn = Callable[[UncertaintyRecord, UncertaintyRecord, LifecycleEvent, "Policy"], bool]


def _always(before, after, event, policy) -> bool:
    return True


def _carries_substance(event: LifecycleEvent) -> bool:
    # Evidence-driven guards react to actual evidence or re-assessments,
    # never to inert bookkeeping notes that ride on the same event kind.
    payload = event.payload
    return bool(payload.get("evidence")) or any(
        key in payload for key in ("severity", "likelihood", "min_likelihood")
    )


def _resolution_thresholds_met(before, after, event, policy) -> bool:
    return (
        _carries_substance(event)
        and after.kind.category is Category.EPISTEMOLOGICAL
        and after.risk.severity <= policy.theta_sev
        and after.risk.risk <= policy.theta_risk
    )


def _risk_above_escalation(before, after, event, policy) -> bool:
    return _carries_substance(event) and after.risk.risk > policy.theta_esc


def _risk_refined_within_escalation(before, after, event, policy) -> bool:
    # De-escalation needs actual refinement: this event must have lowered
    # risk, not merely annotated the record.
    return after.risk.risk <= policy.theta_esc and after.risk.risk < before.risk.risk


def _human_decision(action: str) -> GuardFn:
    def guard(before, after, event, policy) -> bool:
        return event.payload.get("decision_action") == action

    return guard


def _expiry_reached(before, after, event, policy) -> bool:
    return after.expiry is not None and event.timestamp >= after.expiry


GUARDS: dict[str, GuardFn] = {
    "always": _always,
    "resolution-thresholds-met": _resolution_thresholds_met,
    "risk-above-escalation": _risk_above_escalation,
    "risk-refined-within-escalation": _risk_refined_within_escalation,
    "human-requests-more-evidence": _human_decision(DECISION_REQUEST_MORE_EVIDENCE),
    "human-accepts-risk": _human_decision(DECISION_ACCEPT_RISK),
    "human-resolves": _human_decision(DECISION_RESOLVE),
    "expiry-reached": _expiry_reached,
}


@dataclass(frozen=True)
class TransitionRule:
    from_state: LifecycleState
    event_kind: EventKind
    guard: str
    to_state: LifecycleState
    epistemological_only: bool = False
    engine_completed: bool = False
    residual: bool = False

    def to_json(self) -> dict:
        return {
            "from": self.from_state.value,
            "event_kind": self.event_kind.value,
            "guard": self.guard,
            "to": self.to_state.value,
            "epistemological_only": self.epistemological_only,
            "engine_completed": self.engine_completed,
            "residual": self.residual,
        }


_S = LifecycleState
_E = EventKind

TRANSITION_TABLE: tuple[TransitionRule, ...] = (
    TransitionRule(_S.DETECTED, _E.CHARACTERIZATION_COMPLETED, "always", _S.CHARACTERIZED),
    TransitionRule(_S.CHARACTERIZED, _E.MITIGATION_INITIATED, "always", _S.MITIGATED),
    TransitionRule(
        _S.MITIGATED,
        _E.EVIDENCE_ACCUMULATED,
        "resolution-thresholds-met",
        _S.RESOLVED,
        epistemological_only=True,
    ),
    TransitionRule(_S.MITIGATED, _E.DECISION_COMMITTED, "always", _S.EXPIRED, residual=True),
    TransitionRule(_S.MITIGATED, _E.EVIDENCE_ACCUMULATED, "risk-above-escalation", _S.ESCALATED),
    TransitionRule(_S.MITIGATED, _E.ORCHESTRATOR_ESCALATION, "always", _S.ESCALATED),
    TransitionRule(
        _S.ESCALATED, _E.EVIDENCE_ACCUMULATED, "risk-refined-within-escalation", _S.MITIGATED
    ),
    TransitionRule(_S.ESCALATED, _E.HUMAN_DECISION, "human-requests-more-evidence", _S.MITIGATED),
    TransitionRule(
        _S.ESCALATED, _E.HUMAN_DECISION, "human-accepts-risk", _S.EXPIRED, residual=True
    ),
    TransitionRule(
        _S.ESCALATED,
        _E.HUMAN_DECISION,
        "human-resolves",
        _S.RESOLVED,
        epistemological_only=True,
        engine_completed=True,
    ),
    # Expiry applies from every non-terminal state. The human-resolve row and
    # the timer rows are engine completions of the core table; audits carry the
    # flag so the two classes of path stay distinguishable.
    TransitionRule(
        _S.DETECTED, _E.TIMER_ELAPSED, "expiry-reached", _S.EXPIRED,
        engine_completed=True, residual=True,
    ),
    TransitionRule(
        _S.CHARACTERIZED, _E.TIMER_ELAPSED, "expiry-reached", _S.EXPIRED,
        engine_completed=True, residual=True,
    ),
    TransitionRule(
        _S.MITIGATED, _E.TIMER_ELAPSED, "expiry-reached", _S.EXPIRED,
        engine_completed=True, residual=True,
    ),
    TransitionRule(
        _S.ESCALATED, _E.TIMER_ELAPSED, "expiry-reached", _S.EXPIRED,
        engine_completed=True, residual=True,
    ),
)


@dataclass(frozen=True)
class TransitionOutcome:
    record: UncertaintyRecord
    from_state: LifecycleState
    to_state: LifecycleState
    changed: bool
    rule: Optional[TransitionRule] = None

    @property
    def guard_fired(self) -> Optional[str]:
        return self.rule.guard if self.rule else None


def transition(
    record: UncertaintyRecord, event: LifecycleEvent, policy: "Policy"
) -> TransitionOutcome:
    """Apply one event to one record; returns the unique outcome.

    Evidence/confidence/risk updates are folded in before guards evaluate,
    so a NoChange outcome still returns an evolved record.
    """
    if event.target != record.id:
        raise TargetMismatchError(f"event targets {event.target!r}, record is {record.id!r}")
    if record.state in TERMINAL_STATES:
        raise TerminalStateError(f"record {record.id} is terminal ({record.state.value})")
    if event.kind not in LIFECYCLE_EVENT_KINDS:
        raise ValueError(f"{event.kind.value} is not a lifecycle event")
    if (
        event.kind is EventKind.HUMAN_DECISION
        and event.payload.get("decision_action") == DECISION_RESOLVE
        and record.kind.category is Category.ONTOLOGICAL
    ):
        raise IllegalResolutionError(
            f"record {record.id} is ontological and cannot be resolved"
        )

    from .mechanisms import evolve  # local import: evolve lives with the Evolver

    evolved = evolve(record, event)

    fired = [
        rule
        for rule in TRANSITION_TABLE
        if rule.from_state is record.state
        and rule.event_kind is event.kind
        and GUARDS[rule.guard](record, evolved, event, policy)
    ]
    if len(fired) > 1:  # guards are mutually exclusive by construction
        raise AssertionError(
            f"non-deterministic transition for ({record.state}, {event.kind}): "
            + ", ".join(r.guard for r in fired)
        )
    if fired:
        rule = fired[0]
        return TransitionOutcome(
            record=evolved.with_changes(state=rule.to_state),
            from_state=record.state,
            to_state=rule.to_state,
            changed=True,
            rule=rule,
        )
    return TransitionOutcome(
        record=evolved, from_state=record.state, to_state=record.state, changed=False
    )


def legal_targets(state: LifecycleState, category: Category) -> set[LifecycleState]:
    """Reachable next states under some event/guard, for UI and tests."""
    return {
        rule.to_state
        for rule in TRANSITION_TABLE
        if rule.from_state is state
        and not (rule.epistemological_only and category is Category.ONTOLOGICAL)
    }


def check_timers(
    records: Iterable[UncertaintyRecord],
    now: int,
    already_emitted: frozenset[str] | set[str] = frozenset(),
) -> list[LifecycleEvent]:
    """Timer drafts for every live record whose deadline has passed.

    The expiry boundary is inclusive (a record with expiry == now fires).
    `already_emitted` carries record ids that ever received a timer event so
    at most one is emitted per record, ever.
    """
    events = []
    for record in sorted(records, key=lambda r: r.id):
        if record.state in TERMINAL_STATES or record.id in already_emitted:
            continue
        if record.expiry is not None and record.expiry <= now:
            events.append(
                draft(
                    EventKind.TIMER_ELAPSED,
                    record.id,
                    payload={"expiry": record.expiry},
                    actor="timer",
                    timestamp=now,
                )
            )
    return events


def export_transition_table() -> dict:
    """Machine-readable table for the console and external checkers."""
    return {
        "format_version": FORMAT_VERSION,
        "states": [s.value for s in LifecycleState],
        "terminal_states": sorted(s.value for s in TERMINAL_STATES),
        "lifecycle_event_kinds": [k.value for k in LIFECYCLE_EVENT_KINDS],
        "rules": [rule.to_json() for rule in TRANSITION_TABLE],
    }
