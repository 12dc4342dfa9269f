"""Deterministic scenario harness driving the full pipeline.

A scenario is a scripted multi-agent session over logical ticks. Each tick:
deliver scripted items -> observe -> detect -> construct/characterize ->
evolve -> timers -> orchestrate -> execute; risk propagation rides on the
registry's append path. Identical (scenario, seed, policy) always produce
byte-identical logs, snapshots, and trace reports.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

from . import canonical
from .canonical import FORMAT_VERSION
from .errors import ScenarioInvalidError, TraceMismatchError
from .lifecycle import EventKind, draft
from .mechanisms import (
    DetectionContext,
    Layer,
    construct,
    detect,
    execute,
    observe,
    orchestrate,
)
from .model import Provenance, UncertaintyKind
from .policy import Policy, load_policy
from .prng import substream
from .registry import Registry
from .service import DecisionAction, EscalationService, HumanDecision, HumanRole


class ScriptKind(str, Enum):
    INJECT_SIGNAL = "InjectSignal"
    AGENT_OUTPUT = "AgentOutput"
    HUMAN_DECISION_SCRIPT = "HumanDecisionScript"
    INFRASTRUCTURE_CHANGE = "InfrastructureChange"


_DEFAULT_LAYER = {
    ScriptKind.INJECT_SIGNAL: Layer.DATA,
    ScriptKind.AGENT_OUTPUT: Layer.REASONING,
    ScriptKind.INFRASTRUCTURE_CHANGE: Layer.OPERATIONAL,
}


@dataclass(frozen=True)
class ScriptItem:
    at: int
    kind: ScriptKind
    payload: dict


@dataclass(frozen=True)
class TraceAssertion:
    at: int
    kind: UncertaintyKind
    state: str

    def label(self) -> str:
        k = self.kind
        return f"t{self.at} {k.category.value}/{k.family.value}/{k.leaf.value} -> {self.state}"


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    ticks: int
    script: tuple[ScriptItem, ...]
    detector_rules: Optional[tuple[str, ...]] = None
    policy_ref: Optional[str] = None
    expected_trace: tuple[TraceAssertion, ...] = ()


def _data_root():
    return importlib.resources.files("ugov").joinpath("data")


def bundled_scenarios() -> list[str]:
    return sorted(
        p.name[: -len(".json")]
        for p in _data_root().iterdir()
        if p.name.endswith(".json") and not p.name.startswith("policy-")
    )


def load_scenario(ref: str | Path | dict) -> Scenario:
    """Load and validate a scenario from a path, bundled name, or dict."""
    if isinstance(ref, dict):
        data = ref
    else:
        path = Path(ref)
        if path.exists():
            data = canonical.loads(path.read_text(encoding="utf-8"))
        else:
            resource = _data_root().joinpath(f"{ref}.json")
            if not resource.is_file():
                raise ScenarioInvalidError(f"no such scenario file or bundled name: {ref!r}")
            data = canonical.loads(resource.read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ScenarioInvalidError("scenario document must be a JSON object")
    if data.get("format_version") != FORMAT_VERSION:
        raise ScenarioInvalidError("scenario is missing format_version: 1")

    try:
        ticks = int(data["ticks"])
        seed = int(data.get("seed", 0))
        name = str(data["name"])
        script = tuple(
            ScriptItem(at=int(raw["at"]), kind=ScriptKind(raw["kind"]), payload=raw["payload"])
            for raw in data.get("script", [])
        )
        trace = tuple(
            TraceAssertion(
                at=int(raw["at"]),
                kind=UncertaintyKind.from_json(raw["kind"]),
                state=str(raw["state"]),
            )
            for raw in data.get("expected_trace", [])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioInvalidError(f"malformed scenario: {exc}") from exc

    if ticks < 0 or seed < 0:
        raise ScenarioInvalidError("ticks and seed must be non-negative")
    ats = [item.at for item in script]
    if ats != sorted(ats):
        raise ScenarioInvalidError("script items must be sorted by tick")
    if any(at < 1 or at > ticks for at in ats):
        raise ScenarioInvalidError("script item outside 1..ticks")
    rules = data.get("detector_rules")
    return Scenario(
        name=name,
        seed=seed,
        ticks=ticks,
        script=script,
        detector_rules=tuple(rules) if rules else None,
        policy_ref=data.get("policy"),
        expected_trace=trace,
    )


def load_policy_ref(ref: str | Path | None) -> Policy:
    if ref is None or ref == "default":
        return load_policy(
            canonical.loads(_data_root().joinpath("policy-default.json").read_text("utf-8"))
        )
    path = Path(ref)
    if path.exists():
        return load_policy(path)
    resource = _data_root().joinpath(f"{ref}.json")
    if resource.is_file():
        return load_policy(canonical.loads(resource.read_text("utf-8")))
    raise ScenarioInvalidError(f"no such policy file or bundled name: {ref!r}")


class SimulationRun:
    """One scenario execution: batch (`run`) or stepped (`step`)."""

    def __init__(
        self,
        scenario: Scenario,
        policy: Policy,
        out_dir: str | Path | None = None,
        interactive: bool = False,
    ):
        self.scenario = scenario
        self.policy = policy
        self.interactive = interactive
        self.out_dir = Path(out_dir) if out_dir else None
        log_path = self.out_dir / "events.log" if self.out_dir else None
        self.registry = Registry(policy, log_path=log_path)
        self.service = EscalationService(self.registry)
        self._next_tick = 1
        self._assertion_results: list[dict] = []
        self._warnings: list[str] = []
        self._layers_seen: set[str] = set()
        self._rules = self._select_rules()

    def _select_rules(self):
        rules = self.policy.detector_rules
        if self.scenario.detector_rules is not None:
            wanted = set(self.scenario.detector_rules)
            rules = tuple(r for r in rules if r.id in wanted)
        return rules

    # -- stepped execution ---------------------------------------------------

    def pending_tasks(self) -> list[str]:
        return [t.id for t in self.service.list_escalations()]

    def step(self) -> dict:
        """Advance one tick unless escalations are awaiting a human."""
        done = self._next_tick > self.scenario.ticks
        if done:
            return self._status(advanced=False, reason="finished")
        if self.interactive:
            pending = self.pending_tasks()
            if pending:
                return self._status(advanced=False, reason="pending-escalations")
        self._tick(self._next_tick)
        self._next_tick += 1
        return self._status(advanced=True, reason=None)

    def _status(self, advanced: bool, reason: str | None) -> dict:
        return {
            "advanced": advanced,
            "reason": reason,
            "now": self.registry.now,
            "next_tick": self._next_tick,
            "ticks": self.scenario.ticks,
            "done": self._next_tick > self.scenario.ticks,
            "pending_escalations": self.pending_tasks(),
        }

    # -- batch execution -------------------------------------------------------

    def run(self) -> dict:
        while self._next_tick <= self.scenario.ticks:
            self._tick(self._next_tick)
            self._next_tick += 1
        report = self.trace_report()
        if self.out_dir:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            self.registry.write_snapshot(self.out_dir / "snapshot.json")
            (self.out_dir / "trace_report.json").write_text(
                canonical.dumps(report) + "\n", encoding="utf-8"
            )
            (self.out_dir / "trace_report.txt").write_text(
                render_report_text(report), encoding="utf-8"
            )
            self.registry.close()
        return report

    # -- tick pipeline -----------------------------------------------------------

    def _tick(self, t: int) -> None:
        self.registry.append(
            draft(EventKind.TICK_ADVANCED, "", payload={"tick": t}, actor="simulator", timestamp=t)
        )
        for index, item in enumerate(self.scenario.script):
            if item.at == t:
                self._deliver(item, index, t)
        self.registry.check_timers()
        snapshot = self.registry.snapshot()
        for action in orchestrate(snapshot, self.policy):
            for event in execute(action, snapshot, self.policy):
                self.registry.append(event)
        self._evaluate_trace(t)

    def _deliver(self, item: ScriptItem, index: int, t: int) -> None:
        if item.kind is ScriptKind.HUMAN_DECISION_SCRIPT:
            self._deliver_human_decision(item, t)
            return
        message = dict(item.payload.get("message", {}))
        message.setdefault("layer", _DEFAULT_LAYER[item.kind].value)
        profile = message.pop("noise_profile", None)
        if profile:
            rng = substream(self.scenario.seed, index)
            scale = float(profile.get("scale", 1.0))
            message["noise_values"] = [
                round(rng.next_float() * scale, 6) for _ in range(int(profile.get("samples", 1)))
            ]
        signals = observe(message, now=t)
        ctx = DetectionContext(records=self.registry.snapshot().records, policy=self.policy)
        for signal in signals:
            self._layers_seen.add(signal.layer.value)
            for proposal in detect(signal, self._rules, ctx):
                self._construct_record(proposal, item, index, t)
        evidence = item.payload.get("evidence")
        if evidence:
            self._deliver_evidence(evidence)
        commit = item.payload.get("commit")
        if commit:
            self.registry.append(
                draft(
                    EventKind.DECISION_COMMITTED,
                    commit["record"],
                    payload={"decision": commit.get("decision", "")},
                    actor=str(message.get("agent", "agent")),
                )
            )

    def _construct_record(self, proposal, item: ScriptItem, index: int, t: int) -> None:
        assessment = item.payload.get("assessment")
        if assessment and "severity" not in assessment:
            assessment = assessment.get(proposal.rule_id) or assessment.get("default")
        overrides = item.payload.get("record_overrides", {})
        record = construct(
            proposal,
            Provenance(
                created_by=proposal.signal.source_agent,
                created_at=t,
                valid_from=t,
                source_artifact=f"signal:t{t}:{index}",
            ),
            record_id=self.registry.new_record_id(),
            belief_statement=overrides.get("belief_statement", ""),
            belief_agent=overrides.get("belief_agent", ""),
            topic=overrides.get("topic", ""),
        )
        self.registry.create(record)
        if assessment:
            from .mechanisms import characterize

            event = characterize(self.registry.get(record.id), assessment)
            self.registry.append(self._with_actor(event, proposal.signal.source_agent))
            for link in assessment.get("links", []):
                upstream = link.get("upstream")
                downstream = link.get("downstream")
                attenuation = float(link.get("attenuation", 1.0))
                if upstream:
                    self.registry.link(upstream, record.id, attenuation, actor="simulator")
                elif downstream:
                    self.registry.link(record.id, downstream, attenuation, actor="simulator")

    @staticmethod
    def _with_actor(event, actor: str):
        from dataclasses import replace

        return replace(event, actor=actor)

    def _deliver_evidence(self, spec: dict) -> None:
        payload: dict = {"evidence": list(spec.get("items", []))}
        for key in ("severity", "likelihood"):
            if key in spec:
                payload[key] = spec[key]
        self.registry.append(
            draft(
                EventKind.EVIDENCE_ACCUMULATED,
                spec["record"],
                payload=payload,
                actor=str(spec.get("agent", "agent")),
            )
        )

    def _deliver_human_decision(self, item: ScriptItem, t: int) -> None:
        if self.interactive:
            # Live mode: escalations wait for real console decisions.
            return
        payload = item.payload
        record_id = payload["record"]
        task = next(
            (task for task in self.service.list_escalations() if task.record_id == record_id),
            None,
        )
        if task is None:
            self._warnings.append(
                f"t{t}: scripted decision for {record_id} found no open escalation"
            )
            return
        self.service.submit_decision(
            HumanDecision(
                task_id=task.id,
                human_id=payload["human_id"],
                role=HumanRole(payload["role"]),
                action=DecisionAction(payload["action"]),
                justification=payload["justification"],
            )
        )

    # -- trace evaluation ----------------------------------------------------------

    def _evaluate_trace(self, t: int) -> None:
        snapshot = self.registry.snapshot()
        for assertion in self.scenario.expected_trace:
            if assertion.at != t:
                continue
            matching = [
                r for r in snapshot.records.values() if r.kind == assertion.kind
            ]
            ok = any(r.state.value == assertion.state for r in matching)
            self._assertion_results.append(
                {
                    "at": t,
                    "kind": assertion.kind.to_json(),
                    "state": assertion.state,
                    "ok": ok,
                    "actual": sorted(
                        f"{r.id}:{r.state.value}" for r in matching
                    ),
                }
            )

    def trace_report(self) -> dict:
        snapshot = self.registry.snapshot()
        families = sorted({r.kind.family.value for r in snapshot.records.values()})
        failures = [a for a in self._assertion_results if not a["ok"]]
        return {
            "format_version": FORMAT_VERSION,
            "scenario": self.scenario.name,
            "seed": self.scenario.seed,
            "ticks": self.scenario.ticks,
            "policy_version": self.policy.version,
            "assertions": self._assertion_results,
            "ok": not failures,
            "first_divergence": failures[0] if failures else None,
            "coverage": {"layers": sorted(self._layers_seen), "families": families},
            "records": {
                rid: {"kind": rec.kind.to_json(), "state": rec.state.value}
                for rid, rec in sorted(snapshot.records.items())
            },
            "warnings": self._warnings,
            "last_event_id": snapshot.last_event_id,
        }


def render_report_text(report: dict) -> str:
    lines = [
        f"scenario: {report['scenario']} (seed {report['seed']},"
        f" {report['ticks']} ticks, policy {report['policy_version']})",
        f"records: {len(report['records'])}, events: {report['last_event_id']}",
        "coverage: layers=" + ",".join(report["coverage"]["layers"])
        + " families=" + ",".join(report["coverage"]["families"]),
        "assertions:",
    ]
    for a in report["assertions"]:
        kind = a["kind"]
        lines.append(
            f"  [{'ok' if a['ok'] else 'FAIL'}] t{a['at']}"
            f" {kind['category']}/{kind['family']}/{kind['leaf']} -> {a['state']}"
            f" (actual: {', '.join(a['actual']) or 'none'})"
        )
    for warning in report["warnings"]:
        lines.append(f"  [warn] {warning}")
    lines.append(f"verdict: {'PASS' if report['ok'] else 'FAIL'}")
    return "\n".join(lines) + "\n"


def run_scenario(
    scenario: Scenario, policy: Policy, out_dir: str | Path | None = None
) -> dict:
    """Run to completion; raises TraceMismatchError on golden-trace divergence."""
    sim = SimulationRun(scenario, policy, out_dir=out_dir)
    report = sim.run()
    if not report["ok"]:
        raise TraceMismatchError(
            f"trace diverged: {report['first_divergence']}",
            first_divergence=report["first_divergence"],
        )
    return report
