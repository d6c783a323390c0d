"""Error hierarchy shared across the toolkit.

The CLI maps these to exit codes: ConfigError -> 1, DataError -> 2,
BackendError -> 3.
"""


class SsdKitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(SsdKitError):
    """Invalid configuration or CLI arguments.

    `problems` collects every validation failure so the caller can report
    them all at once.
    """

    def __init__(self, message: str, problems: list[str] | None = None):
        super().__init__(message)
        self.problems = problems or [message]


class DataError(SsdKitError):
    """Malformed or inconsistent input data (files, formats, ids)."""


class BackendError(SsdKitError):
    """Embedding backend failure. Carries the ids left without vectors."""

    def __init__(self, message: str, missing_ids: list[str] | None = None):
        super().__init__(message)
        self.missing_ids = missing_ids or []
