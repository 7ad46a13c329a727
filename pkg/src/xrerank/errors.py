"""Exception hierarchy. Each family maps to a CLI exit code."""


class XRerankError(Exception):
    exit_code = 1


class ConfigError(XRerankError):
    exit_code = 2


class DataError(XRerankError):
    exit_code = 3


class IngestionError(DataError):
    pass


class PathError(DataError):
    """A path that does not follow the user -> product -> ... -> product shape.

    ``reason`` is a short machine-readable code.
    """

    def __init__(self, reason: str, message: str):
        super().__init__(f"{reason}: {message}")
        self.reason = reason


class LookupMissError(DataError):
    pass


class InvariantError(XRerankError):
    exit_code = 4
