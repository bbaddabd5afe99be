from typing import Optional


class LabError(Exception):
    """Base class for every error raised by the laboratory."""


class InstanceError(LabError):
    pass


class BidError(LabError):
    pass


class ModeError(LabError):
    """Operation called on an instance of the wrong mode (standard vs polyhedral)."""


class ValuationDomainError(LabError):
    pass


class ValuationSpecError(LabError):
    pass


class MissingBudgetError(LabError):
    pass


class InfeasibleAllocationError(LabError):
    pass


class EnumerationLimitError(LabError):
    pass


class ProfileError(LabError):
    pass


class SearchConfigError(LabError):
    pass


class ReportError(LabError):
    pass


class ScenarioError(LabError):
    def __init__(self, scenario_id: str, cause: Optional[BaseException] = None):
        self.scenario_id = scenario_id
        self.cause = cause
        super().__init__(f"scenario {scenario_id} failed: {cause}")


class DeviationFeasibilityError(AssertionError):
    """A budget-safe deviation emitted a bid above the agent's budget."""
