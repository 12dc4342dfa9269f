"""Escalation tasks, human decisions, and the HTTP facade."""

import json

import pytest
from fastapi.testclient import TestClient

from conftest import ONT_KIND, make_record
from ugov.api import create_app
from ugov.canonical import loads
from ugov.errors import ForbiddenError, UnknownTargetError, ValidationError, WrongStateError
from ugov.lifecycle import EventKind, draft
from ugov.mechanisms import HandlingAction
from ugov.model import ActionKind, LifecycleState as S, Polarity
from ugov.registry import Registry
from ugov.scenario import SimulationRun, load_scenario
from ugov.service import (
    DecisionAction,
    EscalationService,
    HumanDecision,
    HumanRole,
    TaskStatus,
)


def escalated_registry(policy, kind=None):
    """Registry holding one escalated record with mixed evidence."""
    registry = Registry(policy)
    record = make_record(
        record_id=registry.new_record_id(),
        severity=0.9,
        likelihood=0.8,
        state=S.DETECTED,
        **({"kind": kind} if kind else {}),
    )
    registry.create(record)
    registry.append(
        draft(
            EventKind.CHARACTERIZATION_COMPLETED,
            record.id,
            payload={"scope": ["decision:test"], "severity": 0.9, "likelihood": 0.8},
        )
    )
    registry.append(draft(EventKind.MITIGATION_INITIATED, record.id))
    registry.append(
        draft(
            EventKind.EVIDENCE_ACCUMULATED,
            record.id,
            payload={
                "evidence": [
                    {"source": "AgentReasoning", "polarity": "Supporting", "weight": 0.4,
                     "payload": "scan quality adequate"},
                    {"source": "AgentReasoning", "polarity": "Conflicting", "weight": 0.4,
                     "payload": "flow data absent"},
                ]
            },
        )
    )
    registry.append(draft(EventKind.ORCHESTRATOR_ESCALATION, record.id, actor="escalate-rule"))
    return registry, record.id


def decision(task_id, action=DecisionAction.ACCEPT_RISK, human="dr-a", justification="reviewed"):
    return HumanDecision(
        task_id=task_id,
        human_id=human,
        role=HumanRole.RISK_ACCEPTANCE,
        action=action,
        justification=justification,
    )


class TestTasks:
    def test_no_escalations_no_tasks(self, default_policy):
        assert EscalationService(Registry(default_policy)).list_escalations() == []

    def test_exactly_one_open_task_per_escalated_record(self, default_policy):
        registry, rid = escalated_registry(default_policy)
        tasks = EscalationService(registry).list_escalations()
        assert len(tasks) == 1
        assert tasks[0].record_id == rid
        assert tasks[0].status is TaskStatus.PENDING

    def test_view_lists_evidence_verbatim(self, default_policy):
        registry, rid = escalated_registry(default_policy)
        view = EscalationService(registry).list_escalations()[0].view
        record = registry.get(rid)
        shown = (
            view["supporting_evidence"] + view["conflicting_evidence"] + view["neutral_evidence"]
        )
        assert sorted(e["id"] for e in shown) == sorted(e.id for e in record.evidence)
        assert view["current_decision"] == record.belief_statement
        assert view["unresolved_uncertainties"][0]["id"] == rid
        assert view["consequences"]["of_action"]
        assert view["consequences"]["of_inaction"]

    def test_deescalation_without_decision_drops_task(self, default_policy):
        registry, rid = escalated_registry(default_policy)
        service = EscalationService(registry)
        task_id = service.list_escalations()[0].id
        registry.append(
            draft(
                EventKind.EVIDENCE_ACCUMULATED,
                rid,
                payload={"evidence": [], "severity": 0.2, "likelihood": 0.2},
            )
        )
        assert service.list_escalations() == []
        with pytest.raises(UnknownTargetError):
            service.get_task(task_id)

    def test_reescalation_opens_fresh_episode(self, default_policy):
        registry, rid = escalated_registry(default_policy)
        service = EscalationService(registry)
        first = service.list_escalations()[0].id
        registry.append(
            draft(
                EventKind.EVIDENCE_ACCUMULATED,
                rid,
                payload={"evidence": [], "severity": 0.2, "likelihood": 0.2},
            )
        )
        registry.append(
            draft(
                EventKind.EVIDENCE_ACCUMULATED,
                rid,
                payload={"evidence": [], "severity": 0.95, "likelihood": 0.9},
            )
        )
        second = service.list_escalations()[0].id
        assert first != second


class TestClaims:
    def test_claim_then_conflicting_claim(self, default_policy):
        registry, _ = escalated_registry(default_policy)
        service = EscalationService(registry)
        task_id = service.list_escalations()[0].id
        claimed = service.claim(task_id, "dr-a")
        assert claimed.status is TaskStatus.CLAIMED and claimed.claimed_by == "dr-a"
        with pytest.raises(WrongStateError):
            service.claim(task_id, "dr-b")
        # idempotent for the same human
        assert service.claim(task_id, "dr-a").status is TaskStatus.CLAIMED

    def test_claims_survive_via_log(self, default_policy):
        registry, _ = escalated_registry(default_policy)
        service = EscalationService(registry)
        task_id = service.list_escalations()[0].id
        service.claim(task_id, "dr-a")
        from ugov.canonical import dumps_line

        lines = [dumps_line({"format_version": 1})]
        lines += [dumps_line(e.event.to_json()) for e in registry.entries()]
        rebuilt = Registry.replay(lines, default_policy)
        assert EscalationService(rebuilt).get_task(task_id).claimed_by == "dr-a"


class TestDecisions:
    def test_accept_risk_expires_with_residual_and_actor(self, default_policy):
        registry, rid = escalated_registry(default_policy)
        service = EscalationService(registry)
        task_id = service.list_escalations()[0].id
        entries = service.submit_decision(decision(task_id))
        record = registry.get(rid)
        assert record.state is S.EXPIRED
        transition_entry = next(e for e in entries if e.new_state is S.EXPIRED)
        assert transition_entry.residual
        assert transition_entry.actor == "dr-a"
        # evidence event carries the justification as human-provided evidence
        evidence_entry = entries[0]
        assert evidence_entry.event.kind is EventKind.EVIDENCE_ACCUMULATED
        item = registry.get(rid).evidence[-1]
        assert item.source.value == "HumanProvided"
        assert item.payload == "reviewed"
        assert service.get_task(task_id).status is TaskStatus.DECIDED

    def test_resolve_forbidden_for_ontological(self, default_policy):
        registry, _ = escalated_registry(default_policy, kind=ONT_KIND)
        service = EscalationService(registry)
        task_id = service.list_escalations()[0].id
        with pytest.raises(ForbiddenError):
            service.submit_decision(decision(task_id, action=DecisionAction.RESOLVE))

    def test_resolve_supports_belief_and_resolves(self, default_policy):
        registry, rid = escalated_registry(default_policy)
        service = EscalationService(registry)
        task_id = service.list_escalations()[0].id
        service.submit_decision(decision(task_id, action=DecisionAction.RESOLVE))
        record = registry.get(rid)
        assert record.state is S.RESOLVED
        assert record.evidence[-1].polarity is Polarity.SUPPORTING

    def test_request_more_evidence_returns_to_mitigated_with_acquisition(self, default_policy):
        registry, rid = escalated_registry(default_policy)
        service = EscalationService(registry)
        task_id = service.list_escalations()[0].id
        entries = service.submit_decision(
            decision(task_id, action=DecisionAction.REQUEST_MORE_EVIDENCE)
        )
        assert registry.get(rid).state is S.MITIGATED
        acquisitions = [
            e
            for e in entries
            if e.event.payload.get("action", {}).get("kind") == "AcquireData"
        ]
        assert len(acquisitions) == 1
        assert acquisitions[0].actor == "dr-a"

    def test_authorize_adaptation_runs_actions_and_reopens_task(self, default_policy):
        registry, rid = escalated_registry(default_policy)
        service = EscalationService(registry)
        task_id = service.list_escalations()[0].id
        action = HandlingAction(
            id="restructure-1",
            target=rid,
            kind=ActionKind.RESTRUCTURE_WORKFLOW,
            parameters={"mode": "serialize-writes"},
            authorized_by="dr-a",
        )
        decision_obj = HumanDecision(
            task_id=task_id,
            human_id="dr-a",
            role=HumanRole.GOVERNANCE,
            action=DecisionAction.AUTHORIZE_ADAPTATION,
            justification="serialize conflicting writers",
            authorized_actions=(action,),
        )
        entries = service.submit_decision(decision_obj)
        assert registry.get(rid).state is S.ESCALATED  # adaptation does not decide fate
        executed = [
            e for e in entries
            if e.event.payload.get("action", {}).get("id") == "restructure-1"
        ]
        assert len(executed) == 1 and executed[0].actor == "dr-a"
        open_tasks = service.list_escalations()
        assert len(open_tasks) == 1 and open_tasks[0].id != task_id

    def test_exactly_once_per_task(self, default_policy):
        registry, _ = escalated_registry(default_policy)
        service = EscalationService(registry)
        task_id = service.list_escalations()[0].id
        service.submit_decision(decision(task_id))
        with pytest.raises(WrongStateError):
            service.submit_decision(decision(task_id, human="dr-b"))

    def test_empty_justification_rejected(self, default_policy):
        registry, _ = escalated_registry(default_policy)
        service = EscalationService(registry)
        task_id = service.list_escalations()[0].id
        with pytest.raises(ValidationError):
            service.submit_decision(decision(task_id, justification="   "))

    def test_claimed_by_other_blocks_decision(self, default_policy):
        registry, _ = escalated_registry(default_policy)
        service = EscalationService(registry)
        task_id = service.list_escalations()[0].id
        service.claim(task_id, "dr-a")
        with pytest.raises(WrongStateError):
            service.submit_decision(decision(task_id, human="dr-b"))

    def test_hedged_interpretation_spawns_variance_record(self, default_policy):
        registry, _ = escalated_registry(default_policy)
        service = EscalationService(registry)
        task_id = service.list_escalations()[0].id
        hedged = HumanDecision(
            task_id=task_id,
            human_id="dr-a",
            role=HumanRole.INTERPRETATION,
            action=DecisionAction.ACCEPT_RISK,
            justification="possibly fine for this age group, not sure about the shunt",
        )
        service.submit_decision(hedged)
        spawned = registry.query(kind={"leaf": "InterpretationVariance"})
        assert len(spawned) == 1
        assert spawned[0].state is S.DETECTED
        assert spawned[0].provenance.created_by == "dr-a"


def serve_pda(tmp_path, interactive=True, steps=3):
    from ugov.scenario import load_policy_ref

    policy = load_policy_ref("default")
    sim = SimulationRun(
        load_scenario("pda-missing-doppler"), policy,
        out_dir=tmp_path / "out", interactive=interactive,
    )
    for _ in range(steps):
        sim.step()
    return sim


class TestApi:
    def test_escalations_and_record_endpoints(self, default_policy, tmp_path):
        sim = serve_pda(tmp_path)
        client = TestClient(create_app(sim.registry, sim=sim))
        tasks = loads(client.get("/escalations").text)
        assert len(tasks) == 1
        task = tasks[0]
        assert task["status"] == "Pending"
        record = loads(client.get(f"/records/{task['record_id']}").text)
        assert record["record"]["id"] == task["record_id"]
        history = loads(client.get(f"/records/{task['record_id']}/history").text)
        assert history == record["history"]
        assert client.get("/records/ghost").status_code == 404

    def test_claim_and_decide_roundtrip(self, default_policy, tmp_path):
        sim = serve_pda(tmp_path)
        client = TestClient(create_app(sim.registry, sim=sim))
        task = loads(client.get("/escalations").text)[0]
        claimed = loads(
            client.post(f"/escalations/{task['id']}/claim", json={"human_id": "dr-lee"}).text
        )
        assert claimed["status"] == "Claimed"
        response = client.post(
            f"/escalations/{task['id']}/decision",
            json={
                "human_id": "dr-lee",
                "role": "RiskAcceptance",
                "action": "AcceptRisk",
                "justification": "bedside review complete",
            },
        )
        assert response.status_code == 200
        record = loads(client.get(f"/records/{task['record_id']}").text)["record"]
        assert record["state"] == "Expired"
        # losing a rerun: second decision conflicts
        again = client.post(
            f"/escalations/{task['id']}/decision",
            json={"human_id": "dr-x", "role": "Judgment", "action": "AcceptRisk",
                  "justification": "me too"},
        )
        assert again.status_code == 409

    def test_validation_and_forbidden_status_codes(self, default_policy, tmp_path):
        sim = serve_pda(tmp_path)
        client = TestClient(create_app(sim.registry, sim=sim))
        task = loads(client.get("/escalations").text)[0]
        empty = client.post(
            f"/escalations/{task['id']}/decision",
            json={"human_id": "a", "role": "Judgment", "action": "AcceptRisk",
                  "justification": ""},
        )
        assert empty.status_code == 422

    def test_event_stream_matches_entries(self, default_policy, tmp_path):
        sim = serve_pda(tmp_path)
        client = TestClient(create_app(sim.registry, sim=sim))
        body = client.get("/events", params={"since": 0, "follow": 0}).text
        streamed = [loads(line) for line in body.splitlines()]
        assert [e["event"]["id"] for e in streamed] == [
            e.event.id for e in sim.registry.entries()
        ]
        # cursor semantics
        tail = client.get("/events", params={"since": streamed[-1]["event"]["id"]}).text
        assert tail == ""
        assert client.get("/events", params={"since": 10**6}).status_code == 400

    def test_snapshot_is_canonical(self, default_policy, tmp_path):
        sim = serve_pda(tmp_path)
        client = TestClient(create_app(sim.registry, sim=sim))
        assert client.get("/snapshot").text == sim.registry.snapshot().canonical_text() + "\n"

    def test_transition_table_endpoint(self, default_policy):
        client = TestClient(create_app(Registry(default_policy)))
        table = loads(client.get("/transition-table").text)
        assert {"states", "rules", "terminal_states"} <= set(table)

    def test_step_endpoint_pauses_on_escalation(self, default_policy, tmp_path):
        sim = serve_pda(tmp_path, steps=0)
        client = TestClient(create_app(sim.registry, sim=sim))
        statuses = [loads(client.post("/scenario/step").text) for _ in range(4)]
        assert statuses[0]["advanced"] and statuses[1]["advanced"] and statuses[2]["advanced"]
        paused = statuses[3]
        assert not paused["advanced"] and paused["reason"] == "pending-escalations"
        # deciding unblocks stepping; scripted decision is skipped in live mode
        task = loads(client.get("/escalations").text)[0]
        client.post(
            f"/escalations/{task['id']}/decision",
            json={"human_id": "dr-lee", "role": "RiskAcceptance", "action": "AcceptRisk",
                  "justification": "live console decision"},
        )
        resumed = loads(client.post("/scenario/step").text)
        assert resumed["advanced"]

    def test_api_layer_is_stateless(self, default_policy, tmp_path):
        sim = serve_pda(tmp_path)
        first = TestClient(create_app(sim.registry, sim=sim))
        before = first.get("/escalations").text
        # "restart": a brand-new app over the same registry sees identical state
        second = TestClient(create_app(sim.registry, sim=sim))
        assert second.get("/escalations").text == before

    def test_bearer_tokens(self, default_policy, tmp_path, monkeypatch):
        token_file = tmp_path / "tokens.json"
        token_file.write_text(json.dumps({"s3cr3t": "dr-lee"}), encoding="utf-8")
        monkeypatch.setenv("UR_TOKEN_FILE", str(token_file))
        sim = serve_pda(tmp_path)
        client = TestClient(create_app(sim.registry, sim=sim))
        task = loads(client.get("/escalations").text)[0]
        denied = client.post(f"/escalations/{task['id']}/claim", json={})
        assert denied.status_code == 403
        ok = client.post(
            f"/escalations/{task['id']}/claim",
            json={},
            headers={"Authorization": "Bearer s3cr3t"},
        )
        assert ok.status_code == 200
        assert loads(ok.text)["claimed_by"] == "dr-lee"


class TestSpecInvariants:
    def test_decision_events_linked_by_task_id(self, default_policy):
        registry, rid = escalated_registry(default_policy)
        service = EscalationService(registry)
        task_id = service.list_escalations()[0].id
        entries = service.submit_decision(decision(task_id))
        linked = [
            e for e in entries if e.event.payload.get("task_id") == task_id
        ]
        kinds = {e.event.kind for e in linked}
        assert EventKind.EVIDENCE_ACCUMULATED in kinds
        assert EventKind.HUMAN_DECISION in kinds

    def test_queue_newest_first(self, default_policy):
        registry, first = escalated_registry(default_policy)
        second = make_record(
            record_id=registry.new_record_id(), severity=0.9, likelihood=0.9
        )
        registry.create(second)
        registry.append(
            draft(
                EventKind.CHARACTERIZATION_COMPLETED,
                second.id,
                payload={"scope": ["d"], "severity": 0.9, "likelihood": 0.9},
            )
        )
        registry.append(draft(EventKind.MITIGATION_INITIATED, second.id))
        registry.append(draft(EventKind.ORCHESTRATOR_ESCALATION, second.id))
        tasks = EscalationService(registry).list_escalations()
        assert [t.record_id for t in tasks] == [second.id, first]
