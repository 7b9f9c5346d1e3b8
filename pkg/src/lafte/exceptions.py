"""Exception hierarchy shared across the package.

The CLI maps these onto disjoint exit codes: configuration problems exit 1,
data or population-spec validation problems exit 2, estimation failures
exit 3.
"""


class LafteError(Exception):
    """Base class for all package errors."""


class ConfigError(LafteError):
    """Invalid run configuration (unknown keys, bad values, bad mapping)."""


class ColumnMissingError(ConfigError):
    """A mapped column name is absent from the input file."""


class DataError(LafteError):
    """The input data violates the table contract.

    ``report`` carries the full :class:`~lafte.data.ValidationReport` when
    the failure came from table validation.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SpecError(LafteError):
    """A population spec violates a structural invariant."""


class EstimationError(LafteError):
    """Base class for failures inside an estimation routine."""


class RankDeficientError(EstimationError):
    """The design (or instrument) matrix is rank deficient."""


class RelevanceError(EstimationError):
    """The first stage is numerically zero; the IV ratio is undefined."""

    def __init__(self, message, first_stage=None, definition=None):
        super().__init__(message)
        self.first_stage = first_stage
        self.definition = definition


class DegenerateTestError(EstimationError):
    """A joint test covariance submatrix is singular."""


class BoundsError(EstimationError):
    """A response bound passed by the caller is violated by the data."""
