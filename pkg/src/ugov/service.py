"""Escalation tasks and human decisions.

Everything here is derived from the registry's audit log: tasks are computed
views over escalation episodes, claims are logged events, and a decision is
applied as (evidence event, lifecycle event, authorized executions) in one
atomic section. Restarting the process loses nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import ForbiddenError, UnknownTargetError, ValidationError, WrongStateError
from .lifecycle import (
    DECISION_ACCEPT_RISK,
    DECISION_AUTHORIZE_ADAPTATION,
    DECISION_REQUEST_MORE_EVIDENCE,
    DECISION_RESOLVE,
    EventKind,
    draft,
)
from .mechanisms import (
    ActionKind,
    DetectionContext,
    HandlingAction,
    Layer,
    Signal,
    construct,
    detect,
    execute,
)
from .model import (
    TERMINAL_STATES,
    Category,
    EvidenceSource,
    LifecycleState,
    Polarity,
    Provenance,
)
from .registry import AuditEntry, Registry


class HumanRole(str, Enum):
    INTERPRETATION = "Interpretation"
    JUDGMENT = "Judgment"
    RISK_ACCEPTANCE = "RiskAcceptance"
    GOVERNANCE = "Governance"


class DecisionAction(str, Enum):
    RESOLVE = "Resolve"
    ACCEPT_RISK = "AcceptRisk"
    REQUEST_MORE_EVIDENCE = "RequestMoreEvidence"
    AUTHORIZE_ADAPTATION = "AuthorizeAdaptation"


_DECISION_VERB = {
    DecisionAction.RESOLVE: DECISION_RESOLVE,
    DecisionAction.ACCEPT_RISK: DECISION_ACCEPT_RISK,
    DecisionAction.REQUEST_MORE_EVIDENCE: DECISION_REQUEST_MORE_EVIDENCE,
    DecisionAction.AUTHORIZE_ADAPTATION: DECISION_AUTHORIZE_ADAPTATION,
}


class TaskStatus(str, Enum):
    PENDING = "Pending"
    CLAIMED = "Claimed"
    DECIDED = "Decided"


@dataclass(frozen=True)
class HumanDecision:
    task_id: str
    human_id: str
    role: HumanRole
    action: DecisionAction
    justification: str
    authorized_actions: tuple[HandlingAction, ...] = ()

    @classmethod
    def from_json(cls, data: dict) -> "HumanDecision":
        return cls(
            task_id=data["task_id"],
            human_id=data["human_id"],
            role=HumanRole(data["role"]),
            action=DecisionAction(data["action"]),
            justification=data.get("justification", ""),
            authorized_actions=tuple(
                HandlingAction.from_json(a) for a in data.get("authorized_actions", ())
            ),
        )


@dataclass(frozen=True)
class EscalationTask:
    id: str
    record_id: str
    episode: int
    created_event_id: int
    status: TaskStatus
    claimed_by: Optional[str]
    view: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "record_id": self.record_id,
            "episode": self.episode,
            "created_event_id": self.created_event_id,
            "status": self.status.value,
            "claimed_by": self.claimed_by,
            "view": self.view,
        }


@dataclass
class _Episode:
    record_id: str
    index: int
    created_event_id: int
    decided: bool = False
    open: bool = True


class EscalationService:
    """Pure facade over the registry: holds no state of its own."""

    def __init__(self, registry: Registry):
        self.registry = registry

    # -- task derivation -----------------------------------------------------

    def _episodes(self) -> dict[str, _Episode]:
        episodes: dict[str, _Episode] = {}
        open_by_record: dict[str, _Episode] = {}
        counters: dict[str, int] = {}
        for entry in self.registry.entries():
            rid = entry.event.target
            current = open_by_record.get(rid)
            decided_this_entry = False
            if entry.event.kind is EventKind.HUMAN_DECISION and current is not None:
                current.decided = True
                decided_this_entry = True
            if (
                current is not None
                and entry.prior_state is LifecycleState.ESCALATED
                and entry.new_state is not LifecycleState.ESCALATED
            ):
                current.open = False
                open_by_record.pop(rid, None)
                current = None
            entered = (
                entry.new_state is LifecycleState.ESCALATED
                and entry.prior_state is not LifecycleState.ESCALATED
            )
            # A decision that leaves the record escalated (adaptation was
            # authorized) closes its episode and opens a fresh one so the
            # record never sits escalated without an open task.
            reopened = (
                decided_this_entry
                and entry.new_state is LifecycleState.ESCALATED
            )
            if reopened and current is not None:
                current.open = False
                open_by_record.pop(rid, None)
            if entered or reopened:
                counters[rid] = counters.get(rid, 0) + 1
                episode = _Episode(
                    record_id=rid,
                    index=counters[rid],
                    created_event_id=entry.event.id,
                )
                episodes[f"{rid}:e{episode.index}"] = episode
                open_by_record[rid] = episode
        return episodes

    def _task_from_episode(self, task_id: str, episode: _Episode, with_view: bool) -> EscalationTask:
        claims = self.registry.claims()
        if episode.decided:
            status = TaskStatus.DECIDED
        elif task_id in claims:
            status = TaskStatus.CLAIMED
        else:
            status = TaskStatus.PENDING
        return EscalationTask(
            id=task_id,
            record_id=episode.record_id,
            episode=episode.index,
            created_event_id=episode.created_event_id,
            status=status,
            claimed_by=claims.get(task_id),
            view=self._build_view(episode.record_id) if with_view else {},
        )

    def _build_view(self, record_id: str) -> dict:
        """The structured decision package shown to the operator."""
        record = self.registry.get(record_id)
        snapshot = self.registry.snapshot()
        supporting = [e.to_json() for e in record.evidence if e.polarity is Polarity.SUPPORTING]
        conflicting = [e.to_json() for e in record.evidence if e.polarity is Polarity.CONFLICTING]
        neutral = [e.to_json() for e in record.evidence if e.polarity is Polarity.NEUTRAL]
        unresolved = [record.summary()]
        for up in sorted(record.upstream):
            up_record = snapshot.records.get(up)
            if up_record is not None and up_record.state not in TERMINAL_STATES:
                unresolved.append(up_record.summary())
        assumptions = [
            "operational risk is modeled as severity x likelihood",
            (
                f"thresholds in force (policy {self.registry.policy.version}): resolve at"
                f" risk<={self.registry.policy.theta_risk}, escalate above"
                f" {self.registry.policy.theta_esc}"
            ),
        ]
        assumptions += [
            value
            for key, value in sorted(record.annotations.items())
            if key.startswith("assumption")
        ]
        of_action = record.annotations.get(
            "consequence_of_action",
            f"committing now accepts residual risk {record.risk.risk:.3f}"
            " and records it against the decision",
        )
        of_inaction = record.annotations.get(
            "consequence_of_inaction",
            "the decision stays blocked"
            + (
                f"; validity expires at tick {record.expiry}"
                if record.expiry is not None
                else " until new evidence arrives"
            ),
        )
        return {
            "current_decision": record.belief_statement,
            "unresolved_uncertainties": unresolved,
            "supporting_evidence": supporting,
            "conflicting_evidence": conflicting,
            "neutral_evidence": neutral,
            "assumptions": assumptions,
            "consequences": {"of_action": of_action, "of_inaction": of_inaction},
        }

    # -- queries ---------------------------------------------------------------

    def list_escalations(
        self, status: TaskStatus | str | None = None, limit: int | None = None
    ) -> list[EscalationTask]:
        """Open (pending or claimed) tasks, newest first."""
        tasks = []
        for task_id, episode in self._episodes().items():
            if not episode.open or episode.decided:
                continue
            tasks.append(self._task_from_episode(task_id, episode, with_view=True))
        if status is not None:
            want = TaskStatus(status)
            tasks = [t for t in tasks if t.status is want]
        tasks.sort(key=lambda t: -t.created_event_id)
        return tasks[:limit] if limit else tasks

    def get_task(self, task_id: str) -> EscalationTask:
        episodes = self._episodes()
        episode = episodes.get(task_id)
        if episode is None or (not episode.open and not episode.decided):
            raise UnknownTargetError(f"unknown escalation task {task_id!r}")
        return self._task_from_episode(task_id, episode, with_view=True)

    # -- commands ---------------------------------------------------------------

    def claim(self, task_id: str, human_id: str) -> EscalationTask:
        with self.registry.locked():
            task = self.get_task(task_id)
            if task.status is TaskStatus.DECIDED:
                raise WrongStateError(f"task {task_id} already decided")
            if task.status is TaskStatus.CLAIMED and task.claimed_by != human_id:
                raise WrongStateError(f"task {task_id} claimed by {task.claimed_by}")
            if task.status is TaskStatus.PENDING:
                self.registry.append(
                    draft(
                        EventKind.TASK_CLAIMED,
                        task.record_id,
                        payload={"task_id": task_id, "human_id": human_id},
                        actor=human_id,
                    )
                )
            return self.get_task(task_id)

    def submit_decision(self, decision: HumanDecision) -> list[AuditEntry]:
        """Apply one human decision; exactly one submission per task wins."""
        if not decision.justification.strip():
            raise ValidationError("justification must be non-empty")
        with self.registry.locked():
            task = self.get_task(decision.task_id)
            if task.status is TaskStatus.DECIDED:
                raise WrongStateError(f"task {decision.task_id} already decided")
            if task.status is TaskStatus.CLAIMED and task.claimed_by != decision.human_id:
                raise WrongStateError(
                    f"task {decision.task_id} claimed by {task.claimed_by}"
                )
            record = self.registry.get(task.record_id)
            if (
                decision.action is DecisionAction.RESOLVE
                and record.kind.category is Category.ONTOLOGICAL
            ):
                raise ForbiddenError(
                    f"record {record.id} is ontological; residual uncertainty can be"
                    " accepted or bounded but not resolved"
                )

            entries: list[AuditEntry] = []
            # (a) the decision itself is first-class evidence
            polarity = (
                Polarity.SUPPORTING
                if decision.action is DecisionAction.RESOLVE
                else Polarity.NEUTRAL
            )
            entries.append(
                self.registry.append(
                    draft(
                        EventKind.EVIDENCE_ACCUMULATED,
                        record.id,
                        payload={
                            "evidence": [
                                {
                                    "source": EvidenceSource.HUMAN_PROVIDED.value,
                                    "polarity": polarity.value,
                                    "weight": 1.0 if polarity is Polarity.SUPPORTING else 0.0,
                                    "payload": decision.justification,
                                    "origin_agent": decision.human_id,
                                }
                            ],
                            "note": f"human decision {decision.action.value}",
                            "task_id": decision.task_id,
                        },
                        actor=decision.human_id,
                    )
                )
            )

            # (b) the mapped lifecycle event
            authorized = list(decision.authorized_actions)
            if decision.action is DecisionAction.REQUEST_MORE_EVIDENCE:
                authorized.append(
                    HandlingAction(
                        id=f"acquire@{record.id}@{task.id}",
                        target=record.id,
                        kind=ActionKind.ACQUIRE_DATA,
                        parameters={"reason": "human requested more evidence"},
                        authorized_by=decision.human_id,
                    )
                )
            entries.append(
                self.registry.append(
                    draft(
                        EventKind.HUMAN_DECISION,
                        record.id,
                        payload={
                            "decision_action": _DECISION_VERB[decision.action],
                            "task_id": decision.task_id,
                            "human_id": decision.human_id,
                            "role": decision.role.value,
                            "justification": decision.justification,
                            "authorized_actions": [a.to_json() for a in authorized],
                        },
                        actor=decision.human_id,
                    )
                )
            )

            # (c) human-authorized handling actions run through the Commander
            snapshot = self.registry.snapshot()
            for action in authorized:
                for event in execute(action, snapshot, self.registry.policy):
                    entries.append(self.registry.append(event))

            # (d) the decision itself may introduce new uncertainty
            entries.extend(self._post_decision_detection(decision))
            return entries

    def _post_decision_detection(self, decision: HumanDecision) -> list[AuditEntry]:
        signal = Signal(
            timestamp=self.registry.now,
            layer=Layer.INTERACTION,
            source_agent=decision.human_id,
            content={
                "role": decision.role.value,
                "action": decision.action.value,
                "justification": decision.justification,
                "task": decision.task_id,
            },
        )
        ctx = DetectionContext(
            records=self.registry.snapshot().records, policy=self.registry.policy
        )
        entries = []
        for proposal in detect(signal, self.registry.policy.detector_rules, ctx):
            record = construct(
                proposal,
                Provenance(
                    created_by=decision.human_id,
                    created_at=self.registry.now,
                    valid_from=self.registry.now,
                    source_artifact=f"decision:{decision.task_id}",
                ),
                record_id=self.registry.new_record_id(),
                topic="human decision review",
            )
            entries.append(self.registry.create(record, actor=decision.human_id))
        return entries
