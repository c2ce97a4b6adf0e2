"""Exception hierarchy shared across the package."""

from __future__ import annotations


class AudienceTestError(ValueError):
    """Base class for every error raised by audience_ts."""


class EmptyPopulation(AudienceTestError):
    pass


class NoPopulationForTA(AudienceTestError):
    def __init__(self, k: int):
        self.k = k
        super().__init__(f"target audience TA{k + 1} has zero population mass")


class UnknownContext(AudienceTestError):
    pass


class InvalidOverlap(AudienceTestError):
    pass


class InvalidDimensions(AudienceTestError):
    pass


class InvalidBatch(AudienceTestError):
    pass


class NonpositivePayoffDenominator(AudienceTestError):
    def __init__(self, k: int):
        self.k = k
        super().__init__(
            f"payoff of the selected creative for TA{k + 1} is <= 0 in some draw; "
            "unit-free regret is undefined"
        )


class ConfigMismatch(AudienceTestError):
    pass


class InfeasibleGeometry(AudienceTestError):
    def __init__(self, q: float, detail: str = ""):
        self.q = q
        msg = f"overlap q={q:g} implies a CTR outside (0, 1)"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class EmptyTraces(AudienceTestError):
    pass
