"""Exception hierarchy for the governance engine.

Every error the public surface can raise lives here so callers (CLI, HTTP
layer, tests) can map failures without string matching.
"""


class GovernanceError(Exception):
    """Base class for all engine errors."""


class OutOfRangeError(GovernanceError):
    """A numeric input left its documented interval."""


class InvalidKindError(GovernanceError):
    """A (category, family, leaf) triple is not in the taxonomy."""


class TerminalStateError(GovernanceError):
    """An event targeted a record already in a terminal state."""


class TargetMismatchError(GovernanceError):
    """event.target does not name the record it was applied to."""


class IllegalResolutionError(GovernanceError):
    """Resolved was requested for an ontological-category record."""


class UnknownTargetError(GovernanceError):
    """The referenced record, task, or edge endpoint does not exist."""


class StaleTimestampError(GovernanceError):
    """An event carried a timestamp behind the registry clock."""


class CycleRejectedError(GovernanceError):
    """A dependency edge would make the influence graph cyclic."""


class CorruptLogError(GovernanceError):
    """Event log has a gap, ordering violation, or bad header."""


class UnknownCursorError(GovernanceError):
    """A stream cursor does not name a known event id."""


class MalformedInputError(GovernanceError):
    """Raw observation input could not be normalized into signals."""


class WrongStateError(GovernanceError):
    """Operation requires the record/task to be in a different state."""


class ForbiddenError(GovernanceError):
    """The caller may not perform this decision on this record."""


class ValidationError(GovernanceError):
    """A submitted document violates its schema-level constraints."""


class SchemaError(GovernanceError):
    """Policy/scenario document is structurally invalid.

    Carries the full violation list so one load reports everything.
    """

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ConstraintError(SchemaError):
    """Policy document is well-formed but breaks a semantic constraint."""


class UnauthorizedActionError(GovernanceError):
    """Commander received an action with no valid authorization."""


class PolicyViolationError(GovernanceError):
    """Action kind is outside the policy's autonomy scope."""


class ScenarioInvalidError(GovernanceError):
    """Scenario document failed validation."""


class TraceMismatchError(GovernanceError):
    """A run diverged from the scenario's expected trace."""

    def __init__(self, message: str, first_divergence: dict | None = None):
        super().__init__(message)
        self.first_divergence = first_divergence
