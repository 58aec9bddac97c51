"""Exception hierarchy shared across the package."""


class FormationError(Exception):
    """Base class for all errors raised by cavformation."""


class OutOfBounds(FormationError):
    pass


class Blocked(FormationError):
    pass


class InfeasibleTargets(FormationError):
    pass


class InfeasiblePreferences(FormationError):
    pass


class NoPath(FormationError):
    pass


class NonMonotonic(FormationError):
    pass


class OffTrack(FormationError):
    pass


class SimFailure(FormationError):
    """Closed-loop run aborted: a vehicle left its track or two vehicles came too close."""

    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace


class InfeasibleScenario(FormationError):
    pass
