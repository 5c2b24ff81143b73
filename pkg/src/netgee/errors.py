"""Exception types shared across the package."""


class NetgeeError(Exception):
    """Base class for all package errors."""


class ConfigError(NetgeeError):
    """Invalid configuration or specification values."""


class DataFormatError(NetgeeError):
    """Malformed or inconsistent input data.

    Carries the offending file and line when known so CLI output can
    point at the problem.
    """

    def __init__(self, message, *, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f" [{path}" + (f":{line}" if line is not None else "") + "]"
        super().__init__(message + where)


class StallError(NetgeeError):
    """Contagion produced no new cases before reaching baseline prevalence."""


class DegenerateVarianceError(NetgeeError):
    """A variance needed by the computation is exactly zero (e.g. regular graph)."""


class ConstantConfounderError(NetgeeError):
    """The cluster-level confounder takes a single value; no confounding possible."""


class SeparationError(NetgeeError):
    """Logistic fit diverged; classes are (quasi-)separated by the design."""


class PositivityError(NetgeeError):
    """Fitted propensity scores fall outside the allowed (0.01, 0.99) band."""

    def __init__(self, message, cluster_ids=()):
        self.cluster_ids = tuple(cluster_ids)
        super().__init__(message)


class EstimationError(NetgeeError):
    """A regression or estimating-equation solve failed (rank, arms, convergence)."""
