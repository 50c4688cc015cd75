"""Exception hierarchy for featesn."""

import numpy as np


class FeatEsnError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(FeatEsnError, ValueError):
    """A hyperparameter or argument is outside its valid range."""


class ShapeError(FeatEsnError, ValueError):
    """Array dimensions do not conform."""


class SingularMatrixError(FeatEsnError, np.linalg.LinAlgError):
    """A linear system could not be solved because it is singular."""


class NotTrainedError(FeatEsnError, RuntimeError):
    """An operation needs a trained readout but the model has none."""


class NumericError(FeatEsnError, FloatingPointError):
    """Non-finite values were supplied where finite ones are required."""


class DataError(FeatEsnError, ValueError):
    """Input data files are missing, malformed or inconsistent."""


class ConfigError(FeatEsnError, ValueError):
    """An experiment manifest is invalid."""
