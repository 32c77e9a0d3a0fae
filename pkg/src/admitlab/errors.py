"""Exception hierarchy shared across the laboratory modules."""


class AdmitLabError(Exception):
    """Base class for all errors raised by admitlab."""


class ConfigError(AdmitLabError):
    """Invalid configuration, parameters or preconditions."""


class GeometryError(AdmitLabError):
    """Geometric construction failed (empty patch, misplaced point, ...)."""


class SingularityError(AdmitLabError):
    """Evaluation requested at (or too close to) an isolated singularity."""


class SolverError(AdmitLabError):
    """Linear solver breakdown or unacceptable residual."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NumericError(AdmitLabError):
    """Numerical failure outside the linear solver (SPD violation, NaN, ...)."""


class EstimatorRefusal(AdmitLabError):
    """An estimator declined to run because a required condition failed."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
