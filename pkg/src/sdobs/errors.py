"""Exception hierarchy shared across the package."""


class ObserverError(Exception):
    """Base class for all errors raised by sdobs."""


class DimensionMismatch(ObserverError, ValueError):
    pass


class NotHurwitz(ObserverError):
    pass


class NotObservable(ObserverError):
    pass


class NotSymmetric(ObserverError, ValueError):
    pass


class ExpmOverflow(ObserverError, OverflowError):
    pass


class LipschitzViolated(ObserverError):
    pass


class WrongPlantKind(ObserverError, TypeError):
    pass


class ThetaTooSmall(ObserverError, ValueError):
    pass


class DissipationFailed(ObserverError):
    """The dissipation inequality does not hold for the supplied (P, mu, gamma)."""


class InvalidDiameter(ObserverError, ValueError):
    pass


class StepTooLarge(ObserverError, ValueError):
    pass


class NonFiniteState(ObserverError):
    """Simulation diverged.

    ``partial`` carries whatever trajectory was produced before the cutoff.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class EmptySeries(ObserverError, ValueError):
    pass


class IncompatibleScenarios(ObserverError, ValueError):
    pass


class ConfigError(ObserverError, ValueError):
    pass
