"""Exception hierarchy shared by all vlident modules."""


class VLError(Exception):
    """Base class for all toolkit errors."""


class InvalidParameterError(VLError, ValueError):
    """A numeric parameter is outside its admissible range."""


class DataRangeError(VLError, IndexError):
    """Requested rows or lags fall outside the available record."""


class DataError(VLError, ValueError):
    """Data contains non-finite values or is otherwise unusable."""


class SchemaError(VLError, ValueError):
    """A file or object does not match the expected schema.

    ``path`` carries the offending field path (``inputs[0].terms[1].a``) when known.
    """

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class IntegrityError(SchemaError):
    """Serialized content is internally inconsistent."""


class CSVFormatError(DataError):
    """A CSV file is malformed: ragged rows, bad cells, missing columns."""


class TuningFailedError(VLError, RuntimeError):
    """Every candidate evaluated during time-scale tuning was rejected."""

    def __init__(self, message, trace=None):
        self.trace = trace if trace is not None else []
        super().__init__(message)


class ConfigError(VLError, ValueError):
    """An experiment or CLI configuration cannot be resolved."""


class EmptyCSVError(CSVFormatError):
    pass


class MissingColumnError(CSVFormatError):
    pass


class RaggedRowError(CSVFormatError):
    pass


class NonNumericCellError(CSVFormatError):
    pass


class NonFiniteCellError(CSVFormatError):
    pass
