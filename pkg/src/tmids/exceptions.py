class TMIDSError(Exception):
    """Base class for errors raised by tmids."""


class UsageError(TMIDSError, ValueError):
    """Bad arguments or configuration, detected before any work is done."""


class DataError(TMIDSError, ValueError):
    """Input data cannot be used as given (schema, labels, empty tables)."""


class SchemaError(DataError):
    def __init__(self, message, missing=(), extra=()):
        super().__init__(message)
        self.missing = list(missing)
        self.extra = list(extra)


class DimensionError(TMIDSError, ValueError):
    """Sample width does not match the model or clause it is applied to."""
