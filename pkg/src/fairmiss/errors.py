"""Exception hierarchy shared across the package."""


class FairMissError(Exception):
    """Base class for all errors raised by fairmiss."""


# dataset


class SchemaMismatch(FairMissError):
    pass


class ParseError(FairMissError):
    def __init__(self, row, column, raw):
        super().__init__(f"cannot parse {raw!r} in column {column!r} (data row {row})")
        self.row = row
        self.column = column
        self.raw = raw


class RaggedRows(FairMissError):
    pass


class DegenerateSplit(FairMissError):
    pass


class SampleTooLarge(FairMissError):
    pass


class UnknownColumn(FairMissError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class LabelDropForbidden(FairMissError):
    pass


class InvalidGroupSpec(FairMissError):
    pass


# missingness


class NoMissingValues(FairMissError):
    pass


class AllMissingColumn(FairMissError):
    pass


class SingularCovariance(FairMissError):
    pass


# metrics


class EmptyGroup(FairMissError):
    pass


class UndefinedRatio(FairMissError):
    pass


class UndefinedRate(FairMissError):
    pass


class LengthMismatch(FairMissError):
    pass


# octagon


class TooLargeToEnumerate(FairMissError):
    pass


# models


class MissingValuesUnsupported(FairMissError):
    pass


class EmptyTrainingSet(FairMissError):
    pass


class NotATree(FairMissError):
    pass


# experiments


class RegimeEmpty(FairMissError):
    pass


class TooManyDiscarded(FairMissError):
    pass


class NoColumnsLeft(FairMissError):
    pass


class InsufficientRepetitions(FairMissError):
    pass


class SingleClassTraining(UserWarning):
    """Warning: the training labels hold one class, so the fit is a constant predictor."""
