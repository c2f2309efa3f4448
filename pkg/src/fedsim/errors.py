"""Exception types shared across the simulator."""


class FedsimError(Exception):
    """Base class for all simulator errors."""


class IdxFormatError(FedsimError):
    """IDX file has a bad magic number or malformed header."""


class IdxConsistencyError(FedsimError):
    """Image and label files disagree on sample count."""


class ConfigError(FedsimError):
    """Scenario configuration is invalid; message names the offending field."""


class ScoreUndefinedError(FedsimError):
    """Selection score is undefined for a zero-volume node."""


class EmptyEcosystemError(FedsimError):
    """No alive worker nodes to select from."""


class EmptyShardError(FedsimError):
    """A worker was asked to train on an empty data shard."""


class ShapeMismatchError(FedsimError):
    """Weight vectors or feature dimensions do not line up."""


class NoUpdatesError(FedsimError):
    """Aggregation was requested over an empty update list."""


class RoundFailedError(FedsimError):
    """A training round ended with zero responders."""
