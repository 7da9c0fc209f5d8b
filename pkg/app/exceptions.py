"""
Exception hierarchy for the laboratory.

Library code raises these; only the CLI turns them into exit codes.
"""


class LabError(Exception):
    """Base class. `exit_code` is the process status the CLI reports."""

    exit_code = 2


# ── Exit 1: hypotheses ───────────────────────────────────────────────────────


class HypothesisFailure(LabError):
    exit_code = 1


# ── Exit 2: numerical failures ───────────────────────────────────────────────


class NumericalFailure(LabError):
    exit_code = 2


class OutOfDomain(NumericalFailure):
    pass


class OutOfRange(NumericalFailure):
    pass


class NegativeArea(NumericalFailure):
    pass


class StiffnessFailure(NumericalFailure):
    pass


class IllConditionedFit(NumericalFailure):
    pass


class DomainEscape(NumericalFailure):
    pass


class StepLimit(NumericalFailure):
    pass


class NoBracket(NumericalFailure):
    pass


class SeamPole(NumericalFailure):
    """A pole query landed on a doubling seam or a boundary."""


class PreconditionNotRigid(NumericalFailure):
    """A rigidity-branch check was invoked outside the rigidity branch."""


class NotTotallyGeodesic(NumericalFailure):
    pass


# ── Exit 3: malformed input ──────────────────────────────────────────────────


class MalformedConfig(LabError):
    exit_code = 3


class MalformedSpec(MalformedConfig):
    pass


class GeometryViolation(MalformedConfig):
    pass
