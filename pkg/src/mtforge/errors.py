"""Exception types mapped to CLI exit codes (data errors -> 1, config errors -> 2)."""


class MtforgeError(Exception):
    """Base class; carries a machine-readable slug for `error=<slug>` logging."""

    exit_code = 1

    def __init__(self, slug: str, message: str = ""):
        self.slug = slug
        super().__init__(message or slug)


class DataError(MtforgeError):
    """Malformed or unusable input data."""

    exit_code = 1


class ConfigError(MtforgeError):
    """Invalid configuration, parameters, or precondition violation."""

    exit_code = 2
