"""Runtime uncertainty governance for multi-agent systems.

Detects, characterizes, propagates, evolves, and adapts to uncertainty
records over a six-state lifecycle, with policy-driven escalation to a
human-in-the-loop console and a fully auditable event-sourced registry.
"""

from .lifecycle import (
    EventKind,
    LifecycleEvent,
    TransitionOutcome,
    check_timers,
    legal_targets,
    transition,
)
from .mechanisms import (
    DetectorRule,
    HandlingAction,
    Signal,
    construct,
    characterize,
    detect,
    evolve,
    execute,
    observe,
    orchestrate,
)
from .model import (
    ActionKind,
    Category,
    EvidenceItem,
    EvidenceSource,
    Family,
    Leaf,
    LifecycleState,
    Polarity,
    Provenance,
    RiskAssessment,
    UncertaintyKind,
    UncertaintyRecord,
    compute_risk,
    validate_kind,
)
from .policy import Policy, load_policy, should_engage_human
from .registry import AuditEntry, Edge, Registry, RegistrySnapshot
from .scenario import Scenario, SimulationRun, load_scenario, run_scenario
from .service import DecisionAction, EscalationService, EscalationTask, HumanDecision, HumanRole

__version__ = "0.1.0"

__all__ = [
    "ActionKind",
    "AuditEntry",
    "Category",
    "DecisionAction",
    "DetectorRule",
    "Edge",
    "EscalationService",
    "EscalationTask",
    "EventKind",
    "EvidenceItem",
    "EvidenceSource",
    "Family",
    "HandlingAction",
    "HumanDecision",
    "HumanRole",
    "Leaf",
    "LifecycleEvent",
    "LifecycleState",
    "Polarity",
    "Policy",
    "Provenance",
    "Registry",
    "RegistrySnapshot",
    "RiskAssessment",
    "Scenario",
    "Signal",
    "SimulationRun",
    "TransitionOutcome",
    "UncertaintyKind",
    "UncertaintyRecord",
    "characterize",
    "check_timers",
    "compute_risk",
    "construct",
    "detect",
    "evolve",
    "execute",
    "legal_targets",
    "load_policy",
    "load_scenario",
    "observe",
    "orchestrate",
    "run_scenario",
    "should_engage_human",
    "transition",
    "validate_kind",
]
