"""Exception and warning types shared across the package."""


class LexsegError(Exception):
    """Base class for all package errors."""


class InvalidLabelError(LexsegError, ValueError):
    pass


class ConfigurationError(LexsegError):
    pass


class ResourceError(LexsegError, FileNotFoundError):
    """A required file or directory is missing.

    The message should tell the user where the resource was expected and
    how to obtain it.
    """


class ShapeError(LexsegError, ValueError):
    pass


class NoEmbeddingError(LexsegError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class EmptyCompositionError(LexsegError, ValueError):
    pass


class DataLeakError(LexsegError):
    """A test-partition label reached a training code path."""


class UndefinedFractionError(LexsegError, ZeroDivisionError):
    pass


class LexsegWarning(UserWarning):
    """Non-fatal condition that the pipeline recovers from (e.g. zero maps)."""
