"""Domain error hierarchy.

Every error carries a machine-readable ``code`` (the class name) so the
service layer can map module failures onto structured HTTP bodies without
string matching.
"""


class FlexError(Exception):
    """Base class for all domain errors raised by this package."""

    @property
    def code(self) -> str:
        return type(self).__name__


# -- time series ------------------------------------------------------------

class EmptyInput(FlexError):
    pass


class NonUniformGrid(FlexError):
    pass


class NegativeReading(FlexError):
    pass


class UpsampleRequested(FlexError):
    pass


class IncompatibleIntervals(FlexError):
    pass


class AllGaps(FlexError):
    pass


# -- spectral ----------------------------------------------------------------

class GappySeries(FlexError):
    pass


class TooShort(FlexError):
    pass


class NoPeaks(FlexError):
    pass


class PeriodBelowResolution(FlexError):
    pass


# -- baselines ---------------------------------------------------------------

class TooFewPoints(FlexError):
    pass


class UndefinedScore(FlexError):
    pass


class InsufficientCycles(FlexError):
    pass


class EmptyAfterExclusion(FlexError):
    pass


class FractionOutOfRange(FlexError):
    pass


# -- HVAC models -------------------------------------------------------------

class InsufficientOnTime(FlexError):
    pass


class SingleClassTraining(FlexError):
    pass


class HorizonZero(FlexError):
    pass


# -- VPP allocation ----------------------------------------------------------

class NoActiveContracts(FlexError):
    pass


class ForecastGap(FlexError):
    pass


class InconsistentSteps(FlexError):
    pass


class GridMismatch(FlexError):
    pass


# -- storage / ingestion -----------------------------------------------------

class UnknownAsset(FlexError):
    pass


class DuplicateTimestamp(FlexError):
    pass


class MalformedRow(FlexError):
    pass


class InvalidParameters(FlexError):
    pass


# -- service lifecycle -------------------------------------------------------

class DeadlinePassed(FlexError):
    pass


class LifecycleViolation(FlexError):
    pass
