"""Exception types shared across the package."""

# Diagnostic used whenever no assignment can satisfy the constraints.
INFEASIBLE_DIAGNOSTIC = "capacities too small or constraints too strong"


class PartPlanError(Exception):
    """Base class for all partplan errors."""


class SpecError(PartPlanError):
    """A cluster spec or layout document is malformed."""


class InfeasibleError(PartPlanError):
    """No assignment satisfies the replication/scattering/capacity constraints."""

    def __init__(self, detail: str = ""):
        msg = INFEASIBLE_DIAGNOSTIC
        if detail:
            msg = f"{msg} ({detail})"
        super().__init__(msg)


class PreviousLayoutError(PartPlanError):
    """The previous layout is incompatible with the current spec."""


class OracleGuardError(PartPlanError):
    """Instance exceeds the brute-force oracle's size guard."""
