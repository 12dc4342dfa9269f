"""Core domain model: taxonomy, uncertainty records, evidence, and risk.

Everything here is a plain value type with a canonical JSON form. Records are
frozen; all mutation happens by replacement inside the registry so state can
only move through the lifecycle engine.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Optional

from .errors import InvalidKindError, OutOfRangeError, ValidationError


class Category(str, Enum):
    EPISTEMOLOGICAL = "Epistemological"
    ONTOLOGICAL = "Ontological"


class Family(str, Enum):
    MODEL = "Model"
    DATA = "Data"
    INFERENTIAL = "Inferential"
    INTERPRETATIONAL = "Interpretational"
    ALEATORY = "Aleatory"
    ARCHITECTURAL_MORPHING = "ArchitecturalMorphing"
    INTERACTION = "Interaction"


class Leaf(str, Enum):
    # Model
    STRUCTURAL = "Structural"
    BEHAVIOURAL = "Behavioural"
    PARAMETER = "Parameter"
    SEMANTIC = "Semantic"
    APPLICABILITY = "Applicability"
    # Data
    NOISE = "Noise"
    MISSING = "Missing"
    SAMPLING_BIAS = "SamplingBias"
    DISTRIBUTIONAL_SHIFT = "DistributionalShift"
    # Inferential
    PREDICTION = "Prediction"
    CALIBRATION = "Calibration"
    # Interpretational
    SEMANTIC_AMBIGUITY = "SemanticAmbiguity"
    EXPLANATION_UNCERTAINTY = "ExplanationUncertainty"
    INTERPRETATION_VARIANCE = "InterpretationVariance"
    # Ontological families have no sub-leaf; the family doubles as the leaf.
    ALEATORY = "Aleatory"
    ARCHITECTURAL_MORPHING = "ArchitecturalMorphing"
    INTERACTION = "Interaction"


# The validity table. 14 epistemological leaves + 3 ontological families
# (leaf == family) make exactly 17 legal triples.
TAXONOMY: dict[Category, dict[Family, tuple[Leaf, ...]]] = {
    Category.EPISTEMOLOGICAL: {
        Family.MODEL: (
            Leaf.STRUCTURAL,
            Leaf.BEHAVIOURAL,
            Leaf.PARAMETER,
            Leaf.SEMANTIC,
            Leaf.APPLICABILITY,
        ),
        Family.DATA: (
            Leaf.NOISE,
            Leaf.MISSING,
            Leaf.SAMPLING_BIAS,
            Leaf.DISTRIBUTIONAL_SHIFT,
        ),
        Family.INFERENTIAL: (Leaf.PREDICTION, Leaf.CALIBRATION),
        Family.INTERPRETATIONAL: (
            Leaf.SEMANTIC_AMBIGUITY,
            Leaf.EXPLANATION_UNCERTAINTY,
            Leaf.INTERPRETATION_VARIANCE,
        ),
    },
    Category.ONTOLOGICAL: {
        Family.ALEATORY: (Leaf.ALEATORY,),
        Family.ARCHITECTURAL_MORPHING: (Leaf.ARCHITECTURAL_MORPHING,),
        Family.INTERACTION: (Leaf.INTERACTION,),
    },
}


def valid_triples() -> list[tuple[Category, Family, Leaf]]:
    """All 17 legal (category, family, leaf) combinations, in table order."""
    out = []
    for category, families in TAXONOMY.items():
        for family, leaves in families.items():
            for leaf in leaves:
                out.append((category, family, leaf))
    return out


def validate_kind(category: Any, family: Any, leaf: Any) -> bool:
    """Total validity check; unknown names simply yield False."""
    try:
        cat = Category(category)
        fam = Family(family)
        lf = Leaf(leaf)
    except ValueError:
        return False
    return lf in TAXONOMY.get(cat, {}).get(fam, ())


@dataclass(frozen=True)
class UncertaintyKind:
    category: Category
    family: Family
    leaf: Leaf

    def __post_init__(self):
        if not validate_kind(self.category, self.family, self.leaf):
            raise InvalidKindError(
                f"illegal kind triple ({self.category}, {self.family}, {self.leaf})"
            )

    def to_json(self) -> dict:
        return {
            "category": self.category.value,
            "family": self.family.value,
            "leaf": self.leaf.value,
        }

    @classmethod
    def from_json(cls, data: dict) -> "UncertaintyKind":
        return cls(Category(data["category"]), Family(data["family"]), Leaf(data["leaf"]))


class EvidenceSource(str, Enum):
    OBSERVATION = "Observation"
    AGENT_REASONING = "AgentReasoning"
    HUMAN_PROVIDED = "HumanProvided"
    TIMER_EXPIRATION = "TimerExpiration"


class Polarity(str, Enum):
    SUPPORTING = "Supporting"
    CONFLICTING = "Conflicting"
    NEUTRAL = "Neutral"


@dataclass(frozen=True)
class EvidenceItem:
    id: str
    timestamp: int
    source: EvidenceSource
    polarity: Polarity
    weight: float
    payload: str = ""
    origin_agent: str = ""

    def __post_init__(self):
        if self.timestamp < 0:
            raise ValidationError(f"evidence {self.id}: negative timestamp")
        if self.weight < 0:
            raise ValidationError(f"evidence {self.id}: negative weight")
        if self.source is EvidenceSource.TIMER_EXPIRATION and (
            self.polarity is not Polarity.NEUTRAL or self.weight != 0
        ):
            raise ValidationError(
                f"evidence {self.id}: timer expiration must be neutral with weight 0"
            )

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "timestamp": self.timestamp,
            "source": self.source.value,
            "polarity": self.polarity.value,
            "weight": self.weight,
            "payload": self.payload,
            "origin_agent": self.origin_agent,
        }

    @classmethod
    def from_json(cls, data: dict) -> "EvidenceItem":
        return cls(
            id=data["id"],
            timestamp=data["timestamp"],
            source=EvidenceSource(data["source"]),
            polarity=Polarity(data["polarity"]),
            weight=data["weight"],
            payload=data.get("payload", ""),
            origin_agent=data.get("origin_agent", ""),
        )


@dataclass(frozen=True)
class RiskAssessment:
    severity: float
    likelihood: float
    risk: float

    def to_json(self) -> dict:
        return {"severity": self.severity, "likelihood": self.likelihood, "risk": self.risk}

    @classmethod
    def from_json(cls, data: dict) -> "RiskAssessment":
        return cls(data["severity"], data["likelihood"], data["risk"])


def compute_risk(severity: float, likelihood: float) -> RiskAssessment:
    """risk = severity x likelihood, both normalized to [0, 1]."""
    for name, value in (("severity", severity), ("likelihood", likelihood)):
        if not 0.0 <= value <= 1.0:
            raise OutOfRangeError(f"{name}={value!r} outside [0, 1]")
    return RiskAssessment(severity=severity, likelihood=likelihood, risk=severity * likelihood)


@dataclass(frozen=True)
class Provenance:
    created_by: str
    created_at: int
    valid_from: int
    source_artifact: str

    def to_json(self) -> dict:
        return {
            "created_by": self.created_by,
            "created_at": self.created_at,
            "valid_from": self.valid_from,
            "source_artifact": self.source_artifact,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Provenance":
        return cls(
            data["created_by"], data["created_at"], data["valid_from"], data["source_artifact"]
        )


class Irreducibility(str, Enum):
    IN_PRINCIPLE = "InPrinciple"
    OPERATIONAL = "Operational"
    STRATEGIC = "Strategic"


# Each ontological family has exactly one irreducibility class.
IRREDUCIBILITY_BY_FAMILY: dict[Family, Irreducibility] = {
    Family.ALEATORY: Irreducibility.IN_PRINCIPLE,
    Family.ARCHITECTURAL_MORPHING: Irreducibility.OPERATIONAL,
    Family.INTERACTION: Irreducibility.STRATEGIC,
}


@dataclass(frozen=True)
class OntologicalContext:
    indeterminacy_source: str
    irreducibility: Irreducibility

    def to_json(self) -> dict:
        return {
            "indeterminacy_source": self.indeterminacy_source,
            "irreducibility": self.irreducibility.value,
        }

    @classmethod
    def from_json(cls, data: dict) -> "OntologicalContext":
        return cls(data["indeterminacy_source"], Irreducibility(data["irreducibility"]))


class LifecycleState(str, Enum):
    DETECTED = "Detected"
    CHARACTERIZED = "Characterized"
    MITIGATED = "Mitigated"
    RESOLVED = "Resolved"
    ESCALATED = "Escalated"
    EXPIRED = "Expired"


TERMINAL_STATES = frozenset({LifecycleState.RESOLVED, LifecycleState.EXPIRED})


class ActionKind(str, Enum):
    ACQUIRE_DATA = "AcquireData"
    MULTI_AGENT_DELIBERATION = "MultiAgentDeliberation"
    REQUIRE_VERIFICATION = "RequireVerification"
    REQUEST_CLARIFICATION = "RequestClarification"
    ADJUST_AUTONOMY = "AdjustAutonomy"
    RESTRUCTURE_WORKFLOW = "RestructureWorkflow"
    DEFER_ACTION = "DeferAction"
    DECOMPOSE_ACTION = "DecomposeAction"
    CONSTRAIN_INFERENCE = "ConstrainInference"
    LIMIT_CONCURRENCY = "LimitConcurrency"
    ESCALATE = "Escalate"
    NOTIFY_HUMAN = "NotifyHuman"


# Action kinds whose execution starts active mitigation of a characterized
# record (as opposed to escalation/notification control flow).
MITIGATION_ACTION_KINDS = frozenset(
    {
        ActionKind.ACQUIRE_DATA,
        ActionKind.MULTI_AGENT_DELIBERATION,
        ActionKind.REQUIRE_VERIFICATION,
        ActionKind.REQUEST_CLARIFICATION,
        ActionKind.ADJUST_AUTONOMY,
        ActionKind.RESTRUCTURE_WORKFLOW,
        ActionKind.DEFER_ACTION,
        ActionKind.DECOMPOSE_ACTION,
        ActionKind.CONSTRAIN_INFERENCE,
        ActionKind.LIMIT_CONCURRENCY,
    }
)

DEFAULT_CONFIDENCE = 0.5  # maximum-entropy prior when no estimate is supplied


@dataclass(frozen=True)
class UncertaintyRecord:
    """One governed uncertainty: the registry's unit of state.

    `state` only ever changes through the lifecycle engine; `evidence`,
    `confidence`, and `risk` only through applied events.
    """

    id: str
    kind: UncertaintyKind
    scope: frozenset[str] = frozenset()
    ontological_ctx: Optional[OntologicalContext] = None
    provenance: Provenance = Provenance("", 0, 0, "")
    evidence: tuple[EvidenceItem, ...] = ()
    confidence: float = DEFAULT_CONFIDENCE
    risk: RiskAssessment = RiskAssessment(0.0, 0.0, 0.0)
    expiry: Optional[int] = None
    upstream: frozenset[str] = frozenset()
    downstream: frozenset[str] = frozenset()
    state: LifecycleState = LifecycleState.DETECTED
    belief_statement: str = ""
    belief_agent: str = ""
    topic: str = ""
    annotations: dict[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValidationError(f"record {self.id}: confidence outside [0, 1]")
        if self.id in self.upstream or self.id in self.downstream:
            raise ValidationError(f"record {self.id}: depends on itself")
        if self.upstream & self.downstream:
            raise ValidationError(f"record {self.id}: upstream/downstream overlap")
        if self.ontological_ctx is not None:
            if self.kind.category is not Category.ONTOLOGICAL:
                raise ValidationError(
                    f"record {self.id}: ontological context on epistemological record"
                )
            expected = IRREDUCIBILITY_BY_FAMILY[self.kind.family]
            if self.ontological_ctx.irreducibility is not expected:
                raise ValidationError(
                    f"record {self.id}: irreducibility {self.ontological_ctx.irreducibility}"
                    f" does not match family {self.kind.family}"
                )
        last_ts = -1
        for item in self.evidence:
            if item.timestamp < last_ts:
                raise ValidationError(f"record {self.id}: evidence timestamps decrease")
            last_ts = item.timestamp

    def with_changes(self, **kw) -> "UncertaintyRecord":
        return replace(self, **kw)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind.to_json(),
            "scope": sorted(self.scope),
            "ontological_ctx": (
                self.ontological_ctx.to_json() if self.ontological_ctx else None
            ),
            "provenance": self.provenance.to_json(),
            "evidence": [item.to_json() for item in self.evidence],
            "confidence": self.confidence,
            "risk": self.risk.to_json(),
            "expiry": self.expiry,
            "upstream": sorted(self.upstream),
            "downstream": sorted(self.downstream),
            "state": self.state.value,
            "belief_statement": self.belief_statement,
            "belief_agent": self.belief_agent,
            "topic": self.topic,
            "annotations": dict(sorted(self.annotations.items())),
        }

    @classmethod
    def from_json(cls, data: dict) -> "UncertaintyRecord":
        return cls(
            id=data["id"],
            kind=UncertaintyKind.from_json(data["kind"]),
            scope=frozenset(data.get("scope", ())),
            ontological_ctx=(
                OntologicalContext.from_json(data["ontological_ctx"])
                if data.get("ontological_ctx")
                else None
            ),
            provenance=Provenance.from_json(data["provenance"]),
            evidence=tuple(EvidenceItem.from_json(e) for e in data.get("evidence", ())),
            confidence=data.get("confidence", DEFAULT_CONFIDENCE),
            risk=RiskAssessment.from_json(data["risk"]),
            expiry=data.get("expiry"),
            upstream=frozenset(data.get("upstream", ())),
            downstream=frozenset(data.get("downstream", ())),
            state=LifecycleState(data["state"]),
            belief_statement=data.get("belief_statement", ""),
            belief_agent=data.get("belief_agent", ""),
            topic=data.get("topic", ""),
            annotations=dict(data.get("annotations", {})),
        )

    def summary(self) -> dict:
        """Compact view used in escalation task payloads."""
        return {
            "id": self.id,
            "kind": self.kind.to_json(),
            "state": self.state.value,
            "confidence": self.confidence,
            "risk": self.risk.risk,
            "topic": self.topic,
            "belief_statement": self.belief_statement,
        }
