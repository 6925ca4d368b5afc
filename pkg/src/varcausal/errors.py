"""Exception types shared across the package."""


class VarCausalError(Exception):
    """Base class for all library errors."""


class ModelError(VarCausalError, ValueError):
    """Invalid model definition (shapes, non-PSD noise covariance, ...)."""


class ScheduleError(VarCausalError, ValueError):
    """Invalid intervention schedule (overlaps, bad windows, bad signals)."""


class DataError(VarCausalError, ValueError):
    """Inconsistent data passed to an operation (shape or index mismatch)."""


class FormatError(VarCausalError, ValueError):
    """Malformed file content (CSV recordings, model/schedule/config files)."""


class RankDeficiencyError(VarCausalError, ValueError):
    """Least-squares subproblem is numerically rank deficient."""

    def __init__(self, node: int, condition: float):
        self.node = node
        self.condition = condition
        super().__init__(
            f"regressor matrix for node {node} is numerically rank deficient "
            f"(condition estimate {condition:.3e}); use the L1-penalized fit instead"
        )


class UnrecoverableNoiseError(VarCausalError, ValueError):
    """A required noise value was destroyed by a zero-noise intervention."""

    def __init__(self, node: int, t: int):
        self.node = node
        self.t = t
        super().__init__(
            f"noise value for node {node} at t={t} is not recoverable from the "
            f"factual recording (destroyed by a zero-noise intervention)"
        )


class DeltaMethodError(VarCausalError, ValueError):
    """Hypothetical mechanism outside what delta propagation supports."""


class ConfigError(VarCausalError, ValueError):
    """Invalid experiment configuration."""
