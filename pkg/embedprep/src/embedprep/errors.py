"""Errors raised by the preparation tools."""


class EmbedPrepError(Exception):
    """Base class for embedprep failures."""


class SchemaError(EmbedPrepError):
    """Input does not match the documented schema."""

    def __init__(self, message: str, where: int | None = None):
        prefix = f"record {where}: " if where is not None else ""
        super().__init__(prefix + message)
        self.where = where


class ModelLoadError(EmbedPrepError):
    """The requested embedding model could not be loaded."""
