"""Exception types shared across the package."""

from __future__ import annotations


class HoughSplatError(Exception):
    """Base class; ``field`` and ``file`` feed the CLI's JSON error report."""

    def __init__(self, message: str, *, file: str | None = None, field: str | None = None):
        super().__init__(message)
        self.file = file
        self.field = field

    def to_dict(self) -> dict:
        out = {"error": type(self).__name__, "message": str(self)}
        if self.file is not None:
            out["file"] = self.file
        if self.field is not None:
            out["field"] = self.field
        return out


class ValidationError(HoughSplatError, ValueError):
    pass


class ConfigError(ValidationError):
    pass


class FormatError(HoughSplatError, ValueError):
    """Malformed or truncated file. ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, *, offset: int | None = None, file: str | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message, file=file)
        self.offset = offset


class VersionError(FormatError):
    pass


class BehindCameraError(HoughSplatError, ValueError):
    pass


class TrainingError(HoughSplatError, RuntimeError):
    pass
