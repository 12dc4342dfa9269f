"""Declarative governance policy: thresholds, autonomy scope, HITL triggers.

Policies are immutable after load and versioned; every audit entry records
the version in force. `load_policy` reports *every* violation at once rather
than failing on the first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, Optional

from .canonical import FORMAT_VERSION
from .errors import ConstraintError, SchemaError
from .model import (
    TERMINAL_STATES,
    ActionKind,
    Category,
    Family,
    Leaf,
    LifecycleState,
    UncertaintyRecord,
)

if TYPE_CHECKING:  # pragma: no cover
    from .mechanisms import DetectorRule
    from .registry import RegistrySnapshot


@dataclass(frozen=True)
class OrchestrationRule:
    """guard -> action, evaluated per record in priority order."""

    id: str
    guard: str
    action: ActionKind
    priority: int = 100
    parameters: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "guard": self.guard,
            "action": self.action.value,
            "priority": self.priority,
            "parameters": self.parameters,
        }


@dataclass(frozen=True)
class HitlTrigger:
    name: str
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"name": self.name, "params": self.params}


@dataclass(frozen=True)
class Policy:
    theta_sev: float = 0.1
    theta_risk: float = 0.1
    theta_esc: float = 0.6
    calibration_delta: float = 0.25
    autonomy_scope: frozenset[ActionKind] = frozenset(ActionKind)
    hitl_triggers: tuple[HitlTrigger, ...] = ()
    orchestration_rules: tuple[OrchestrationRule, ...] = ()
    detector_rules: tuple = ()  # tuple[DetectorRule, ...]
    version: str = "policy-v0"

    def rule_ids(self) -> frozenset[str]:
        return frozenset(rule.id for rule in self.orchestration_rules)

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "version": self.version,
            "theta_sev": self.theta_sev,
            "theta_risk": self.theta_risk,
            "theta_esc": self.theta_esc,
            "calibration_delta": self.calibration_delta,
            "autonomy_scope": sorted(k.value for k in self.autonomy_scope),
            "hitl_triggers": [t.to_json() for t in self.hitl_triggers],
            "orchestration_rules": [r.to_json() for r in self.orchestration_rules],
            "detector_rules": [r.to_json() for r in self.detector_rules],
        }


def load_policy(document: dict | str | Path) -> Policy:
    """Validate and build a Policy; raises with the full violation list."""
    if isinstance(document, (str, Path)):
        try:
            document = json.loads(Path(document).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaError([f"unreadable policy document: {exc}"]) from exc
    if not isinstance(document, dict):
        raise SchemaError(["policy document must be a JSON object"])

    schema_violations: list[str] = []
    constraint_violations: list[str] = []

    def number(name: str, default: float) -> float:
        value = document.get(name, default)
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            schema_violations.append(f"{name} must be a number")
            return default
        if not 0.0 <= value <= 1.0:
            constraint_violations.append(f"{name}={value} outside [0, 1]")
        return float(value)

    theta_sev = number("theta_sev", 0.1)
    theta_risk = number("theta_risk", 0.1)
    theta_esc = number("theta_esc", 0.6)
    calibration_delta = number("calibration_delta", 0.25)
    if theta_risk > theta_esc:
        constraint_violations.append(
            f"theta_risk={theta_risk} must not exceed theta_esc={theta_esc}"
        )

    scope: set[ActionKind] = set()
    raw_scope = document.get("autonomy_scope", [k.value for k in ActionKind])
    if not isinstance(raw_scope, list):
        schema_violations.append("autonomy_scope must be a list of action kinds")
    else:
        for name in raw_scope:
            try:
                scope.add(ActionKind(name))
            except ValueError:
                schema_violations.append(f"unknown action kind in autonomy_scope: {name!r}")
    for required in (ActionKind.ESCALATE, ActionKind.NOTIFY_HUMAN):
        if not schema_violations and required not in scope:
            constraint_violations.append(
                f"autonomy_scope must always include {required.value}"
            )

    triggers: list[HitlTrigger] = []
    for i, raw in enumerate(document.get("hitl_triggers", [])):
        if not isinstance(raw, dict) or "name" not in raw:
            schema_violations.append(f"hitl_triggers[{i}] must be an object with a name")
            continue
        if raw["name"] not in TRIGGER_EVALUATORS:
            schema_violations.append(f"unknown hitl trigger: {raw['name']!r}")
            continue
        triggers.append(HitlTrigger(raw["name"], dict(raw.get("params", {}))))

    from .mechanisms import ORCHESTRATION_GUARDS, DetectorRule

    rules: list[OrchestrationRule] = []
    for i, raw in enumerate(document.get("orchestration_rules", [])):
        try:
            rule = OrchestrationRule(
                id=raw["id"],
                guard=raw["guard"],
                action=ActionKind(raw["action"]),
                priority=int(raw.get("priority", 100)),
                parameters=dict(raw.get("parameters", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            schema_violations.append(f"orchestration_rules[{i}]: {exc}")
            continue
        if rule.guard not in ORCHESTRATION_GUARDS:
            schema_violations.append(f"orchestration_rules[{i}]: unknown guard {rule.guard!r}")
            continue
        rules.append(rule)

    detector_rules: list[DetectorRule] = []
    for i, raw in enumerate(document.get("detector_rules", [])):
        try:
            detector_rules.append(DetectorRule.from_json(raw))
        except Exception as exc:
            schema_violations.append(f"detector_rules[{i}]: {exc}")

    if schema_violations:
        raise SchemaError(schema_violations + constraint_violations)
    if constraint_violations:
        raise ConstraintError(constraint_violations)

    return Policy(
        theta_sev=theta_sev,
        theta_risk=theta_risk,
        theta_esc=theta_esc,
        calibration_delta=calibration_delta,
        autonomy_scope=frozenset(scope),
        hitl_triggers=tuple(triggers),
        orchestration_rules=tuple(rules),
        detector_rules=tuple(detector_rules),
        version=str(document.get("version", "policy-v0")),
    )


def _oscillation_count(path: list[LifecycleState]) -> int:
    """Switches between Mitigated and Escalated along the state path."""
    pair = (LifecycleState.MITIGATED, LifecycleState.ESCALATED)
    relevant = [s for s in path if s in pair]
    return sum(1 for a, b in zip(relevant, relevant[1:]) if a is not b)


def _persistent_disagreement(record, snapshot, params) -> bool:
    path = snapshot.state_paths.get(record.id, [])
    return _oscillation_count(path) >= int(params.get("min_oscillations", 3))


def _unresolved_high_severity_gap(record, snapshot, params) -> bool:
    if record.kind.family is not Family.DATA or record.kind.leaf is not Leaf.MISSING:
        return False
    if record.state in TERMINAL_STATES:
        return False
    if record.risk.severity < float(params.get("severity_min", 0.7)):
        return False
    if record.expiry is None:
        return False
    midpoint = record.provenance.valid_from + (record.expiry - record.provenance.valid_from) / 2
    return snapshot.now >= midpoint


def _irreversible_decision_class(record, snapshot, params) -> bool:
    classes = set(params.get("classes", ()))
    return bool(classes & record.scope)


TRIGGER_EVALUATORS = {
    "persistent-disagreement": _persistent_disagreement,
    "unresolved-high-severity-gap": _unresolved_high_severity_gap,
    "irreversible-decision-class": _irreversible_decision_class,
}


def should_engage_human(
    record: UncertaintyRecord, snapshot: "RegistrySnapshot", policy: Policy
) -> Optional[str]:
    """First matching HITL trigger name by declaration order, or None."""
    for trigger in policy.hitl_triggers:
        if TRIGGER_EVALUATORS[trigger.name](record, snapshot, trigger.params):
            return trigger.name
    return None
