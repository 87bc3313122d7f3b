"""Exception hierarchy.

Validation problems (bad input data, bad configuration) derive from
:class:`ValidationError`; numerical failures during estimation derive from
:class:`EstimationError`.  The CLI maps the two families to exit codes 1 and 2.
"""


class GravPanelError(Exception):
    """Base class for all package errors."""


class ValidationError(GravPanelError, ValueError):
    """Input data or configuration violates a contract."""


class SchemaError(ValidationError):
    """CSV header does not match the declared schema."""


class DataValueError(ValidationError):
    """A data cell is unparsable or outside its admissible domain."""

    def __init__(self, message, *, row=None, column=None, entity=None, period=None):
        super().__init__(message)
        self.row = row
        self.column = column
        self.entity = entity
        self.period = period


class DuplicateKeyError(ValidationError):
    """Two CSV rows share a (reporter, partner, year) key."""


class PanelError(ValidationError):
    """Panel structure is invalid (unbalanced, too short, misaligned)."""


class ConfigError(ValidationError):
    """Pipeline or DGP configuration is invalid."""


class EstimationError(GravPanelError, ArithmeticError):
    """An estimator or test cannot be computed on the given data."""


class SingularRegressionError(EstimationError):
    """Regressor matrix is rank deficient or the fit is degenerate."""

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class WeakInstrumentError(SingularRegressionError):
    """First-stage residuals are collinear with the structural regressors."""


class SimulationDisabledError(EstimationError):
    """A reference distribution is not tabulated and simulation is switched off."""
