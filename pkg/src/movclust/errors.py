"""Exception hierarchy shared across the toolkit."""


class MovclustError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(MovclustError):
    """Bad configuration: unknown key, unparseable value, missing flag."""


class DataError(MovclustError):
    """Bad input data: missing files, schema violations, invariant breaks."""


class DuplicateObservationError(DataError):
    """Two observations share the same (series_id, store, date) key."""


class DegenerateGeometryError(MovclustError):
    """A validity index hit a zero denominator (coincident centroids etc.)."""
