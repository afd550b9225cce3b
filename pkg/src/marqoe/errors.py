"""Exception types shared across the package."""


class MarqoeError(Exception):
    """Base class for all package errors."""


class InvalidPose(MarqoeError):
    pass


class SchemaError(MarqoeError):
    pass


class OrderError(MarqoeError):
    pass


class EmptyTrace(MarqoeError):
    pass


class ManifestError(MarqoeError):
    pass


class OutOfRange(MarqoeError):
    pass


class InvalidParameter(MarqoeError):
    pass


class InfiniteServiceTime(MarqoeError):
    pass


class Unstable(MarqoeError):
    pass


class Infeasible(MarqoeError):
    pass


class NoHistory(MarqoeError):
    pass


class InvalidInput(MarqoeError):
    pass


class EmptyRange(MarqoeError):
    pass


class NotFound(MarqoeError):
    pass


class ConfigError(MarqoeError):
    pass
