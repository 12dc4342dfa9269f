"""Taxonomy, risk arithmetic, and serialization round-trips."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import EPI_KIND, ONT_KIND, make_record
from ugov.errors import InvalidKindError, OutOfRangeError, ValidationError
from ugov.model import (
    Category,
    EvidenceItem,
    EvidenceSource,
    Family,
    Irreducibility,
    Leaf,
    OntologicalContext,
    Polarity,
    Provenance,
    RiskAssessment,
    UncertaintyKind,
    UncertaintyRecord,
    compute_risk,
    valid_triples,
    validate_kind,
)

# Independent spelling of the validity table, written from scratch so the
# enumeration check does not share structure with the implementation.
ORACLE_TABLE = {
    ("Epistemological", "Model"): {
        "Structural", "Behavioural", "Parameter", "Semantic", "Applicability"
    },
    ("Epistemological", "Data"): {"Noise", "Missing", "SamplingBias", "DistributionalShift"},
    ("Epistemological", "Inferential"): {"Prediction", "Calibration"},
    ("Epistemological", "Interpretational"): {
        "SemanticAmbiguity", "ExplanationUncertainty", "InterpretationVariance"
    },
    ("Ontological", "Aleatory"): {"Aleatory"},
    ("Ontological", "ArchitecturalMorphing"): {"ArchitecturalMorphing"},
    ("Ontological", "Interaction"): {"Interaction"},
}


class TestTaxonomy:
    def test_spec_examples(self):
        assert validate_kind("Epistemological", "Inferential", "Prediction")
        assert validate_kind("Ontological", "Aleatory", "Aleatory")
        assert not validate_kind("Epistemological", "Data", "Structural")

    def test_total_on_garbage(self):
        assert not validate_kind("Nope", "Data", "Missing")
        assert not validate_kind(None, None, None)
        assert not validate_kind("Epistemological", "Aleatory", "Aleatory")

    def test_exhaustive_enumeration_matches_oracle(self):
        expected = {
            (cat, fam, leaf)
            for (cat, fam), leaves in ORACLE_TABLE.items()
            for leaf in leaves
        }
        actual = {
            (c.value, f.value, l.value)
            for c in Category
            for f in Family
            for l in Leaf
            if validate_kind(c, f, l)
        }
        assert actual == expected
        assert len(actual) == 17  # 5 + 4 + 2 + 3 epistemological + 3 ontological

    def test_valid_triples_agree_with_validate(self):
        listed = {(c.value, f.value, l.value) for c, f, l in valid_triples()}
        assert len(listed) == 17
        assert all(validate_kind(*t) for t in listed)

    def test_illegal_kind_rejected_at_construction(self):
        with pytest.raises(InvalidKindError):
            UncertaintyKind(Category.EPISTEMOLOGICAL, Family.DATA, Leaf.STRUCTURAL)

    def test_kind_round_trip(self):
        for triple in valid_triples():
            kind = UncertaintyKind(*triple)
            assert UncertaintyKind.from_json(kind.to_json()) == kind


class TestRisk:
    def test_zero_severity_annihilates(self):
        assert compute_risk(0.0, 0.9).risk == 0.0

    def test_identity_case(self):
        assert compute_risk(1.0, 1.0).risk == 1.0

    def test_product(self):
        # independent oracle: plain multiplication
        assert compute_risk(0.8, 0.5).risk == 0.8 * 0.5 == 0.4

    @pytest.mark.parametrize("severity,likelihood", [(-0.1, 0.5), (0.5, 1.2), (2, 0)])
    def test_out_of_range(self, severity, likelihood):
        with pytest.raises(OutOfRangeError):
            compute_risk(severity, likelihood)

    @given(
        st.floats(0, 1, allow_nan=False), st.floats(0, 1, allow_nan=False)
    )
    def test_product_always_in_unit_interval(self, severity, likelihood):
        risk = compute_risk(severity, likelihood)
        assert 0.0 <= risk.risk <= 1.0
        assert risk.risk == severity * likelihood


class TestEvidence:
    def test_timer_expiration_must_be_inert(self):
        with pytest.raises(ValidationError):
            EvidenceItem("e1", 0, EvidenceSource.TIMER_EXPIRATION, Polarity.SUPPORTING, 0.0)
        with pytest.raises(ValidationError):
            EvidenceItem("e1", 0, EvidenceSource.TIMER_EXPIRATION, Polarity.NEUTRAL, 1.0)

    def test_negative_weight_rejected(self):
        with pytest.raises(ValidationError):
            EvidenceItem("e1", 0, EvidenceSource.OBSERVATION, Polarity.NEUTRAL, -0.5)

    def test_round_trip(self):
        item = EvidenceItem(
            "e7", 3, EvidenceSource.HUMAN_PROVIDED, Polarity.SUPPORTING, 1.25, "note", "dr-a"
        )
        assert EvidenceItem.from_json(item.to_json()) == item


class TestOntologicalContext:
    def test_irreducibility_must_match_family(self):
        ctx = OntologicalContext("thermal noise", Irreducibility.OPERATIONAL)
        record = make_record(kind=ONT_KIND).with_changes(ontological_ctx=ctx)
        with pytest.raises(ValidationError):
            record.validate()

    def test_context_forbidden_on_epistemological(self):
        ctx = OntologicalContext("x", Irreducibility.IN_PRINCIPLE)
        record = make_record(kind=EPI_KIND).with_changes(ontological_ctx=ctx)
        with pytest.raises(ValidationError):
            record.validate()


class TestRecord:
    def test_round_trip(self):
        record = make_record(expiry=9).with_changes(
            scope=frozenset({"decision:a", "exam:b"}),
            evidence=(
                EvidenceItem("e1", 1, EvidenceSource.OBSERVATION, Polarity.SUPPORTING, 0.5),
                EvidenceItem("e2", 2, EvidenceSource.AGENT_REASONING, Polarity.CONFLICTING, 0.3),
            ),
            upstream=frozenset({"u-0"}),
            downstream=frozenset({"u-2"}),
            annotations={"assumption_x": "y"},
        )
        record.validate()
        assert UncertaintyRecord.from_json(record.to_json()) == record

    def test_self_dependency_rejected(self):
        with pytest.raises(ValidationError):
            make_record().with_changes(upstream=frozenset({"u-1"})).validate()

    def test_upstream_downstream_disjoint(self):
        broken = make_record().with_changes(
            upstream=frozenset({"u-2"}), downstream=frozenset({"u-2"})
        )
        with pytest.raises(ValidationError):
            broken.validate()

    def test_evidence_timestamps_must_not_decrease(self):
        items = (
            EvidenceItem("e1", 5, EvidenceSource.OBSERVATION, Polarity.NEUTRAL, 0.0),
            EvidenceItem("e2", 3, EvidenceSource.OBSERVATION, Polarity.NEUTRAL, 0.0),
        )
        with pytest.raises(ValidationError):
            make_record().with_changes(evidence=items).validate()

    def test_confidence_bounds(self):
        with pytest.raises(ValidationError):
            make_record().with_changes(confidence=1.5).validate()

    def test_every_tuple_component_has_one_field_home(self):
        # The governed record carries one field per component of the
        # time-indexed uncertainty tuple; this documents the mapping.
        component_to_field = {
            "classification": "kind",
            "affected components/decisions": "scope",
            "ontological context": "ontological_ctx",
            "provenance and validity": "provenance",
            "accumulated evidence": "evidence",
            "belief state": "confidence",
            "operational risk": "risk",
            "temporal validity deadline": "expiry",
            "upstream dependencies": "upstream",
            "downstream influence": "downstream",
        }
        encoded = make_record().to_json()
        fields = list(component_to_field.values())
        assert len(fields) == len(set(fields)) == 10
        for field_name in fields:
            assert field_name in encoded


def test_provenance_round_trip():
    prov = Provenance("agent-1", 4, 5, "signal:t4:0")
    assert Provenance.from_json(prov.to_json()) == prov


def test_risk_assessment_round_trip():
    risk = RiskAssessment(0.3, 0.4, 0.12)
    assert RiskAssessment.from_json(risk.to_json()) == risk


def test_ontological_context_round_trip():
    ctx = OntologicalContext("acoustic speckle", Irreducibility.IN_PRINCIPLE)
    assert OntologicalContext.from_json(ctx.to_json()) == ctx


def test_record_state_is_immutable_from_outside():
    record = make_record()
    with pytest.raises(Exception):
        record.state = "Expired"  # frozen: state moves only through transitions
