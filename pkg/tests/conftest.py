import pytest

from ugov.model import (
    Category,
    Family,
    Leaf,
    LifecycleState,
    Provenance,
    RiskAssessment,
    UncertaintyKind,
    UncertaintyRecord,
)
from ugov.scenario import load_policy_ref

EPI_KIND = UncertaintyKind(Category.EPISTEMOLOGICAL, Family.DATA, Leaf.MISSING)
ONT_KIND = UncertaintyKind(Category.ONTOLOGICAL, Family.ALEATORY, Leaf.ALEATORY)


@pytest.fixture(scope="session")
def default_policy():
    return load_policy_ref("default")


def make_record(
    record_id="u-1",
    kind=EPI_KIND,
    state=LifecycleState.DETECTED,
    severity=0.5,
    likelihood=0.5,
    confidence=0.5,
    expiry=None,
    **kw,
):
    from ugov.model import IRREDUCIBILITY_BY_FAMILY, OntologicalContext

    ctx = None
    if kind.category is Category.ONTOLOGICAL:
        ctx = OntologicalContext("test indeterminacy", IRREDUCIBILITY_BY_FAMILY[kind.family])
    record = UncertaintyRecord(
        id=record_id,
        kind=kind,
        ontological_ctx=ctx,
        provenance=Provenance("tester", 0, 0, "artifact:test"),
        confidence=confidence,
        risk=RiskAssessment(severity, likelihood, severity * likelihood),
        expiry=expiry,
        state=state,
        belief_statement="test belief",
        belief_agent="tester",
        topic="testing",
        **kw,
    )
    record.validate()
    return record
