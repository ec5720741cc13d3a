"""Exception taxonomy.

Three branches map to the CLI exit codes: ConfigError -> 2,
DataError -> 3, NumericalError -> 4.
"""


class FundrankError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(FundrankError):
    """A requested configuration is invalid or infeasible."""


class DataError(FundrankError):
    """Input data violates a documented contract."""


class NumericalError(FundrankError):
    """A numerical procedure degenerated or diverged."""


# --- ingest ---------------------------------------------------------------

class MalformedHeader(DataError):
    pass


class DuplicateQuarter(DataError):
    pass


class EmptyFile(DataError):
    pass


class AllFeaturesDropped(DataError):
    pass


class GapTooLong(DataError):
    pass


# --- preprocess -----------------------------------------------------------

class ZeroBase(NumericalError):
    """Percent change from a zero base (raised only in strict mode)."""


class QuarterOutOfRange(DataError):
    pass


class InsufficientHistory(DataError):
    pass


class EmptyPartition(DataError):
    pass


class ZeroVariance(NumericalError):
    pass


# --- models ---------------------------------------------------------------

class LengthMismatch(DataError):
    pass


class Empty(DataError):
    pass


class TooFewSamples(DataError):
    pass


class MissingModel(DataError):
    pass


class BadDimension(ConfigError):
    pass


class DimensionMismatch(ConfigError):
    pass


class NonFiniteLoss(NumericalError):
    pass


class NoSplits(NumericalError):
    pass


class RuleCapExceeded(ConfigError):
    pass


class DegenerateFiring(NumericalError):
    pass


class UnderDetermined(NumericalError):
    pass


# --- evaluation / aggregation ---------------------------------------------

class UnknownQuarter(DataError):
    pass


class KTooLarge(ConfigError):
    pass


class MissingActual(DataError):
    pass


class TooFewQuarters(DataError):
    pass


class ZeroStd(NumericalError):
    pass


class IndexOutOfRange(ConfigError):
    pass


class QuarterMismatch(DataError):
    pass


class InvalidConfig(ConfigError):
    pass
