"""Exception types raised across the toolkit."""


class ShsError(Exception):
    """Base class for every error raised by shsthreat."""


# data
class MissingHeader(ShsError):
    pass


class UnknownLabelColumn(ShsError):
    pass


class ParseError(ShsError):
    def __init__(self, row, column, message=None):
        self.row = row
        self.column = column
        super().__init__(message or f"cannot parse row {row}, column {column!r}")


class InvalidRange(ShsError):
    pass


class SchemaError(ShsError):
    pass


# models
class EmptyDataset(ShsError):
    pass


class DimensionMismatch(ShsError):
    pass


class DivergenceDetected(ShsError):
    pass


class NonFiniteLoss(ShsError):
    pass


class UnsupportedActivation(ShsError):
    pass


class UnknownLabel(ShsError):
    pass


# clustering / geometry
class InvalidParam(ShsError):
    pass


class TooFewPoints(ShsError):
    pass


class TooFewClusters(ShsError):
    pass


class DegenerateGeometry(ShsError):
    pass


# attack encoding / solving
class BaselineInconsistent(ShsError):
    pass


class InvalidGoal(ShsError):
    pass


class InvalidCapability(ShsError):
    pass


class BackendUnavailable(ShsError):
    pass


class MalformedModel(ShsError):
    pass


class NoBoxBounds(ShsError):
    pass


class EmptyLadder(ShsError):
    pass


class IncompleteBackend(ShsError):
    pass
