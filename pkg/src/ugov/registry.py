"""Event-sourced uncertainty registry.

Single writer: every mutation is an event flowing through `append` under one
lock, applied by a side-effect-free fold step (`_apply`), and persisted to an
append-only canonical-JSON log. Snapshots are immutable copies; replaying a
persisted log over an empty registry reproduces the snapshot byte-for-byte.

The influence graph is kept acyclic; risk flows downstream as attenuated
max-risk flooding, materialized as ordinary evidence events so the log stays
the single source of truth.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Optional

from . import canonical
from .canonical import FORMAT_VERSION
from .errors import (
    CorruptLogError,
    CycleRejectedError,
    OutOfRangeError,
    StaleTimestampError,
    UnknownTargetError,
)
from .lifecycle import (
    LIFECYCLE_EVENT_KINDS,
    EventKind,
    LifecycleEvent,
    check_timers,
    draft,
    transition,
)
from .model import (
    TERMINAL_STATES,
    EvidenceSource,
    LifecycleState,
    Polarity,
    UncertaintyRecord,
)
from .policy import Policy


@dataclass(frozen=True)
class Edge:
    upstream: str
    downstream: str
    attenuation: float

    def to_json(self) -> dict:
        return {"from": self.upstream, "to": self.downstream, "attenuation": self.attenuation}


@dataclass(frozen=True)
class AuditEntry:
    event: LifecycleEvent
    prior_state: Optional[LifecycleState]
    new_state: Optional[LifecycleState]
    guard_fired: Optional[str]
    actor: str
    policy_version: str
    residual: bool = False
    engine_completed: bool = False

    def to_json(self) -> dict:
        return {
            "event": self.event.to_json(),
            "prior_state": self.prior_state.value if self.prior_state else None,
            "new_state": self.new_state.value if self.new_state else None,
            "guard_fired": self.guard_fired,
            "actor": self.actor,
            "policy_version": self.policy_version,
            "residual": self.residual,
            "engine_completed": self.engine_completed,
        }


@dataclass(frozen=True)
class RegistrySnapshot:
    records: dict[str, UncertaintyRecord]
    edges: tuple[Edge, ...]
    last_event_id: int
    now: int
    # Derived views for pure consumers (policy triggers, the Commander's
    # authorization gate). Not part of the canonical serialization.
    state_paths: dict[str, list[LifecycleState]] = field(default_factory=dict)
    human_grants: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "records": {rid: rec.to_json() for rid, rec in self.records.items()},
            "edges": [e.to_json() for e in sorted(self.edges, key=lambda e: (e.upstream, e.downstream))],
            "last_event_id": self.last_event_id,
            "now": self.now,
        }

    def canonical_text(self) -> str:
        return canonical.dumps(self.to_json())


class Registry:
    """The shared uncertainty registry (single process, single writer)."""

    def __init__(self, policy: Policy, log_path: str | Path | None = None):
        self._lock = threading.RLock()
        self._new_entries = threading.Condition(self._lock)
        self._policy = policy
        self._records: dict[str, UncertaintyRecord] = {}
        self._edges: dict[tuple[str, str], Edge] = {}
        self._entries: list[AuditEntry] = []
        self._now = 0
        self._next_event_id = 1
        self._record_counter = 0
        self._state_paths: dict[str, list[LifecycleState]] = {}
        self._human_grants: dict[str, str] = {}
        self._claims: dict[str, str] = {}
        self._timer_emitted: set[str] = set()
        self._propagating = False
        self._replaying = False
        self._log_fh: Optional[IO[str]] = None
        if log_path is not None:
            path = Path(log_path)
            path.parent.mkdir(parents=True, exist_ok=True)
            self._log_fh = path.open("w", encoding="utf-8", newline="\n")
            self._log_fh.write(canonical.dumps_line({"format_version": FORMAT_VERSION}))
            self._log_fh.flush()

    # -- properties --------------------------------------------------------

    @property
    def policy(self) -> Policy:
        return self._policy

    def set_policy(self, policy: Policy) -> None:
        """Atomic hot-swap between queue items."""
        with self._lock:
            self._policy = policy

    @property
    def now(self) -> int:
        with self._lock:
            return self._now

    @property
    def last_event_id(self) -> int:
        with self._lock:
            return self._next_event_id - 1

    def new_record_id(self) -> str:
        with self._lock:
            self._record_counter += 1
            return f"u-{self._record_counter}"

    def locked(self):
        """Expose the writer lock for multi-event atomic sections."""
        return self._lock

    # -- the command path ----------------------------------------------------

    def append(self, event: LifecycleEvent) -> AuditEntry:
        """Validate, stamp, persist, and apply one event.

        Drafts (id 0) receive the next event id; a negative timestamp means
        "now". Raises before any state change on invalid input.
        """
        with self._lock:
            stamped = self._stamp(event)
            self._validate(stamped)
            entry = self._apply(stamped)
            self._persist(stamped)
            self._new_entries.notify_all()
            self._after_apply(entry)
            return entry

    def _stamp(self, event: LifecycleEvent) -> LifecycleEvent:
        event_id = event.id if event.id > 0 else self._next_event_id
        timestamp = event.timestamp if event.timestamp >= 0 else self._now
        payload = event.payload
        if event.kind is EventKind.EVIDENCE_ACCUMULATED and payload.get("evidence"):
            items = []
            for i, item in enumerate(payload["evidence"]):
                item = dict(item)
                if not item.get("id"):
                    item["id"] = f"e{event_id}.{i}"
                item.setdefault("timestamp", timestamp)
                items.append(item)
            payload = dict(payload)
            payload["evidence"] = items
        return LifecycleEvent(
            id=event_id,
            timestamp=timestamp,
            target=event.target,
            kind=event.kind,
            payload=payload,
            actor=event.actor,
        )

    def _validate(self, event: LifecycleEvent) -> None:
        if event.id != self._next_event_id:
            raise CorruptLogError(
                f"event id {event.id} out of order (expected {self._next_event_id})"
            )
        if event.timestamp < self._now:
            raise StaleTimestampError(
                f"event timestamp {event.timestamp} behind registry clock {self._now}"
            )
        if event.kind is EventKind.RECORD_CREATED:
            if event.target in self._records:
                raise CorruptLogError(f"record {event.target} already exists")
        elif event.kind is EventKind.DEPENDENCY_LINKED:
            self._validate_link(
                event.payload["upstream"],
                event.payload["downstream"],
                event.payload["attenuation"],
            )
        elif event.kind in LIFECYCLE_EVENT_KINDS:
            if event.target not in self._records:
                raise UnknownTargetError(f"unknown record {event.target!r}")

    def _validate_link(self, upstream: str, downstream: str, attenuation: float) -> None:
        for rid in (upstream, downstream):
            if rid not in self._records:
                raise UnknownTargetError(f"unknown record {rid!r}")
        if not 0.0 <= attenuation <= 1.0:
            raise OutOfRangeError(f"attenuation={attenuation} outside [0, 1]")
        if upstream == downstream:
            raise CycleRejectedError(f"self-loop on {upstream}")
        if self._reachable(downstream, upstream):
            raise CycleRejectedError(f"edge {upstream}->{downstream} would close a cycle")

    def _reachable(self, start: str, goal: str) -> bool:
        stack, seen = [start], set()
        while stack:
            node = stack.pop()
            if node == goal:
                return True
            if node in seen:
                continue
            seen.add(node)
            stack.extend(e.downstream for e in self._edges.values() if e.upstream == node)
        return False

    def _apply(self, event: LifecycleEvent) -> AuditEntry:
        """Pure fold step: state := f(state, event). No command side effects."""
        prior_state: Optional[LifecycleState] = None
        new_state: Optional[LifecycleState] = None
        guard: Optional[str] = None
        residual = False
        engine_completed = False

        if event.kind is EventKind.RECORD_CREATED:
            record = UncertaintyRecord.from_json(event.payload["record"])
            record.validate()
            self._records[record.id] = record
            self._state_paths[record.id] = [record.state]
            new_state = record.state
        elif event.kind is EventKind.DEPENDENCY_LINKED:
            up = event.payload["upstream"]
            down = event.payload["downstream"]
            attenuation = event.payload["attenuation"]
            self._edges[(up, down)] = Edge(up, down, attenuation)
            self._records[up] = self._records[up].with_changes(
                downstream=self._records[up].downstream | {down}
            )
            self._records[down] = self._records[down].with_changes(
                upstream=self._records[down].upstream | {up}
            )
            prior_state = new_state = self._records[down].state
        elif event.kind is EventKind.TASK_CLAIMED:
            self._claims[event.payload["task_id"]] = event.payload["human_id"]
            record = self._records.get(event.target)
            prior_state = new_state = record.state if record else None
        elif event.kind is EventKind.TICK_ADVANCED:
            pass
        else:
            record = self._records[event.target]
            outcome = transition(record, event, self._policy)
            self._records[event.target] = outcome.record
            prior_state = outcome.from_state
            new_state = outcome.to_state
            if outcome.changed:
                guard = outcome.guard_fired
                residual = outcome.rule.residual
                engine_completed = outcome.rule.engine_completed
                self._state_paths[event.target].append(outcome.to_state)
            if event.kind is EventKind.TIMER_ELAPSED:
                self._timer_emitted.add(event.target)
            if event.kind is EventKind.HUMAN_DECISION:
                for raw in event.payload.get("authorized_actions", ()):
                    self._human_grants[raw["id"]] = event.payload.get("human_id", event.actor)

        self._now = max(self._now, event.timestamp)
        self._next_event_id = event.id + 1
        entry = AuditEntry(
            event=event,
            prior_state=prior_state,
            new_state=new_state,
            guard_fired=guard,
            actor=event.actor,
            policy_version=self._policy.version,
            residual=residual,
            engine_completed=engine_completed,
        )
        self._entries.append(entry)
        return entry

    def _persist(self, event: LifecycleEvent) -> None:
        if self._log_fh is not None:
            self._log_fh.write(canonical.dumps_line(event.to_json()))
            self._log_fh.flush()

    def _after_apply(self, entry: AuditEntry) -> None:
        """Command-side consequences: risk propagation on change/expiry."""
        if self._replaying or self._propagating:
            return
        event = entry.event
        if event.kind is EventKind.DEPENDENCY_LINKED:
            self.propagate(event.payload["upstream"])
            return
        if event.kind not in LIFECYCLE_EVENT_KINDS:
            return
        record = self._records[event.target]
        risk_changed = (
            entry.prior_state is not None
            and self._risk_before_differs(event, record)
        )
        expired_now = (
            entry.new_state is LifecycleState.EXPIRED
            and entry.prior_state is not LifecycleState.EXPIRED
        )
        if risk_changed or expired_now:
            self.propagate(event.target)

    def _risk_before_differs(self, event: LifecycleEvent, record: UncertaintyRecord) -> bool:
        # The fold already replaced the record; reconstruct whether this event
        # changed risk by checking the payload's risk-bearing keys.
        if event.kind is EventKind.CHARACTERIZATION_COMPLETED:
            return True
        if event.kind is EventKind.EVIDENCE_ACCUMULATED:
            payload = event.payload
            return any(k in payload for k in ("severity", "likelihood", "min_likelihood"))
        return False

    # -- public operations ---------------------------------------------------

    def create(self, record: UncertaintyRecord, actor: str = "") -> AuditEntry:
        return self.append(
            draft(
                EventKind.RECORD_CREATED,
                record.id,
                payload={"record": record.to_json()},
                actor=actor or record.provenance.created_by,
            )
        )

    def link(self, upstream: str, downstream: str, attenuation: float, actor: str = "") -> Edge:
        with self._lock:
            self._validate_link(upstream, downstream, attenuation)
            self.append(
                draft(
                    EventKind.DEPENDENCY_LINKED,
                    downstream,
                    payload={
                        "upstream": upstream,
                        "downstream": downstream,
                        "attenuation": attenuation,
                    },
                    actor=actor,
                )
            )
            return self._edges[(upstream, downstream)]

    def propagate(self, changed: str) -> list[AuditEntry]:
        """Attenuated max-risk flooding from `changed`, in topological order.

        Raises each reachable downstream record's likelihood to the maximum
        upstream risk x edge attenuation; never lowers anything; idempotent
        at the fixed point. The raise is carried by an ordinary evidence
        event so replays reproduce it without re-running this code.
        """
        with self._lock:
            if changed not in self._records:
                raise UnknownTargetError(f"unknown record {changed!r}")
            entries: list[AuditEntry] = []
            self._propagating = True
            try:
                for node in self._downstream_topo_order(changed):
                    record = self._records[node]
                    if record.state in TERMINAL_STATES:
                        continue
                    derived = 0.0
                    for (up, down), edge in self._edges.items():
                        if down == node:
                            derived = max(
                                derived, self._records[up].risk.risk * edge.attenuation
                            )
                    increase = derived - record.risk.likelihood
                    if increase <= 0.0:
                        continue
                    entries.append(
                        self.append(
                            draft(
                                EventKind.EVIDENCE_ACCUMULATED,
                                node,
                                payload={
                                    "evidence": [
                                        {
                                            "source": EvidenceSource.OBSERVATION.value,
                                            "polarity": Polarity.CONFLICTING.value,
                                            "weight": increase,
                                            "payload": f"risk propagated from upstream of {node}",
                                            "origin_agent": "registry",
                                        }
                                    ],
                                    "min_likelihood": derived,
                                },
                                actor="registry",
                            )
                        )
                    )
            finally:
                self._propagating = False
            return entries

    def _downstream_topo_order(self, changed: str) -> list[str]:
        reachable: set[str] = set()
        stack = [changed]
        while stack:
            node = stack.pop()
            for (up, down) in self._edges:
                if up == node and down not in reachable:
                    reachable.add(down)
                    stack.append(down)
        indegree = {
            node: sum(1 for (up, down) in self._edges if down == node and up in reachable)
            for node in reachable
        }
        ready = sorted(node for node, deg in indegree.items() if deg == 0)
        order: list[str] = []
        while ready:
            node = ready.pop(0)
            order.append(node)
            for (up, down) in self._edges:
                if up == node and down in reachable:
                    indegree[down] -= 1
                    if indegree[down] == 0:
                        ready.append(down)
            ready.sort()
        return order

    def check_timers(self) -> list[AuditEntry]:
        """Emit and apply at most one expiry event per overdue live record."""
        with self._lock:
            drafts = check_timers(
                self._records.values(), self._now, frozenset(self._timer_emitted)
            )
            return [self.append(d) for d in drafts]

    def query(
        self,
        state: LifecycleState | str | None = None,
        kind: dict | None = None,
        scope: str | None = None,
        min_risk: float | None = None,
        actor: str | None = None,
    ) -> list[UncertaintyRecord]:
        with self._lock:
            records = sorted(self._records.values(), key=lambda r: r.id)
            if state is not None:
                want = LifecycleState(state)
                records = [r for r in records if r.state is want]
            if kind is not None:
                records = [
                    r
                    for r in records
                    if all(r.kind.to_json().get(k) == v for k, v in kind.items())
                ]
            if scope is not None:
                records = [r for r in records if scope in r.scope]
            if min_risk is not None:
                records = [r for r in records if r.risk.risk >= min_risk]
            if actor is not None:
                touched = {
                    e.event.target for e in self._entries if e.actor == actor
                }
                records = [r for r in records if r.id in touched]
            return records

    def get(self, record_id: str) -> UncertaintyRecord:
        with self._lock:
            try:
                return self._records[record_id]
            except KeyError:
                raise UnknownTargetError(f"unknown record {record_id!r}") from None

    def history(self, record_id: str) -> list[AuditEntry]:
        """The record's complete causal chain, in log order."""
        with self._lock:
            if record_id not in self._records:
                raise UnknownTargetError(f"unknown record {record_id!r}")
            return [
                entry
                for entry in self._entries
                if entry.event.target == record_id
                or (
                    entry.event.kind is EventKind.DEPENDENCY_LINKED
                    and entry.event.payload.get("upstream") == record_id
                )
            ]

    def entries(self, since: int = 0) -> list[AuditEntry]:
        with self._lock:
            return [e for e in self._entries if e.event.id > since]

    def wait_for_entries(self, since: int, timeout: float) -> list[AuditEntry]:
        """Block until entries after `since` exist (stream support)."""
        with self._new_entries:
            self._new_entries.wait_for(
                lambda: self._next_event_id - 1 > since, timeout=timeout
            )
            return [e for e in self._entries if e.event.id > since]

    def claims(self) -> dict[str, str]:
        with self._lock:
            return dict(self._claims)

    def snapshot(self) -> RegistrySnapshot:
        with self._lock:
            return RegistrySnapshot(
                records=dict(self._records),
                edges=tuple(self._edges.values()),
                last_event_id=self._next_event_id - 1,
                now=self._now,
                state_paths={k: list(v) for k, v in self._state_paths.items()},
                human_grants=dict(self._human_grants),
            )

    def write_snapshot(self, path: str | Path) -> None:
        Path(path).write_text(self.snapshot().canonical_text() + "\n", encoding="utf-8")

    def close(self) -> None:
        if self._log_fh is not None:
            self._log_fh.close()
            self._log_fh = None

    # -- replay ----------------------------------------------------------------

    @classmethod
    def replay(
        cls, source: str | Path | Iterable[str], policy: Policy
    ) -> "Registry":
        """Rebuild a registry from a persisted event log.

        The log must start with the format header and carry gap-free,
        id-ordered events; anything else is CorruptLog. No command-side
        effects run: the log already contains everything derived.
        """
        if isinstance(source, (str, Path)):
            lines = Path(source).read_text(encoding="utf-8").splitlines()
        else:
            lines = [line.rstrip("\n") for line in source]
        lines = [line for line in lines if line.strip()]
        if not lines:
            return cls(policy)
        header = canonical.loads(lines[0])
        if header.get("format_version") != FORMAT_VERSION:
            raise CorruptLogError(f"bad or missing log header: {lines[0][:80]}")
        registry = cls(policy)
        registry._replaying = True
        try:
            expected_id = 1
            last_ts = 0
            for line in lines[1:]:
                event = LifecycleEvent.from_json(canonical.loads(line))
                if event.id != expected_id:
                    raise CorruptLogError(
                        f"log gap or ordering violation at event {event.id}"
                        f" (expected {expected_id})"
                    )
                if event.timestamp < last_ts:
                    raise CorruptLogError(f"timestamp regression at event {event.id}")
                registry._apply(event)
                if event.kind is EventKind.RECORD_CREATED:
                    suffix = event.target.rsplit("-", 1)[-1]
                    if suffix.isdigit():
                        registry._record_counter = max(
                            registry._record_counter, int(suffix)
                        )
                expected_id += 1
                last_ts = event.timestamp
        finally:
            registry._replaying = False
        return registry
