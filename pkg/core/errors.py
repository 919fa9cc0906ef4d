"""Exception hierarchy shared by every package.

Callers that only care about "something in the framework went wrong"
catch A7Error; the CLI maps it to exit code 1.
"""


class A7Error(Exception):
    """Base class for all framework errors."""


class ConfigError(A7Error):
    """Invalid or unreadable experiment configuration."""


class ShapeError(A7Error, ValueError):
    """Array dimensions do not match what a network or buffer expects."""


class CacheError(A7Error):
    """A forward cache is stale or belongs to a different network."""


class DegenerateVectorError(A7Error, ValueError):
    """A vector that must have non-zero norm (or a positive normalizer) does not."""


class EmptyDatasetError(A7Error, ValueError):
    """Training was requested on an empty dataset."""


class CheckpointError(A7Error):
    """A checkpoint file is missing, malformed, or could not be written."""


class EpisodeFinishedError(A7Error):
    """step() was called on an environment whose episode already ended."""


class NoPathError(A7Error):
    """No path exists from a cell to the goal."""


class MapFormatError(A7Error):
    """A GridWorld map file could not be parsed."""


class NotReadyError(A7Error):
    """A buffer holds fewer items than required for sampling."""


class ColdStartError(A7Error):
    """A feature distance was requested before any feature was stored."""


class BudgetExhaustedError(A7Error):
    """A teacher query was recorded with no advice budget left."""
