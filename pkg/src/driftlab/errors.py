"""Exception hierarchy shared by every driftlab module."""


class DriftLabError(Exception):
    """Base class for all driftlab errors."""


class DataError(DriftLabError):
    """Input data is unusable (CLI exit code 3)."""


class ConfigError(DriftLabError):
    """A configuration is invalid (CLI exit code 2)."""


class SeriesTooShort(DataError):
    pass


class NonFiniteValue(DataError):
    pass


class RankDeficient(DataError):
    pass


class NoAdmissibleSplit(DataError):
    pass


class DomainError(DataError):
    """A value lies outside the domain a detector accepts."""


class EmptySegment(DataError):
    pass


class DegenerateZero(DataError):
    pass


class EmptyBatch(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class KindMismatch(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class MissingColumn(DataError):
    pass


class MissingParam(ConfigError):
    pass


class BadParam(ConfigError):
    pass


class BadSpec(ConfigError):
    pass


class BadConfig(ConfigError):
    pass


class EmptyGrid(ConfigError):
    pass


class IoError(DataError):
    """Reading or writing a file failed."""
