"""Exception types shared across the package."""


class LfmError(Exception):
    """Base class; ``code`` is the stable prefix the CLI prints."""

    code = "E_LFM"


class DimensionError(LfmError, ValueError):
    code = "E_DIM"


class StructureError(LfmError, ValueError):
    code = "E_STRUCT"


class FormatError(LfmError, ValueError):
    """Malformed file; ``offset`` is the byte position where parsing failed."""

    code = "E_FORMAT"

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class TrainingError(LfmError, RuntimeError):
    code = "E_TRAIN"
