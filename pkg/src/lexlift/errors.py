"""Exception types shared by the core package, the service, and the CLI."""


class LexliftError(Exception):
    """Base class; carries the process exit code and HTTP status."""

    exit_code = 1
    http_status = 500


class ConfigError(LexliftError):
    """Bad configuration or failed pre-run validation (missing inputs, dim mismatch)."""

    exit_code = 2
    http_status = 400


class DataError(LexliftError):
    """Malformed or infeasible input data encountered at run time."""

    exit_code = 1
    http_status = 400


class FormatError(LexliftError):
    """Corrupt or incompatible serialized artifact (bad magic, checksum, dims)."""

    exit_code = 1
    http_status = 400
