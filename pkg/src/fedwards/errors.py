"""Exception types raised across the package."""


class FedwardsError(Exception):
    """Base class for all package errors."""


class DomainError(FedwardsError, ValueError):
    """A parameter or argument lies outside its admissible domain."""


class RankError(FedwardsError, ValueError):
    """The Gram matrix does not support the requested basis size."""


class ShapeError(FedwardsError, ValueError):
    """Array shapes disagree."""


class DegenerateWeights(FedwardsError, ArithmeticError):
    """Importance weights collapsed onto too few samples."""


class InsufficientData(FedwardsError, ValueError):
    """Not enough samples or steps for the requested statistic."""


class ConfigError(FedwardsError, ValueError):
    """Malformed or inconsistent configuration document."""


class CheckpointMismatch(ConfigError):
    """A checkpoint was produced under different model parameters."""


class IncompatibleConfigs(ConfigError):
    """Two artifacts were produced under incompatible model parameters."""
