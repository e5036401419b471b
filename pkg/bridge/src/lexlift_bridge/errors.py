"""Error taxonomy mirroring the core toolkit's exit-code conventions."""


class BridgeError(Exception):
    """Runtime failure (bad data, failed subprocess, OOM). CLI exit 1."""

    exit_code = 1


class ConfigError(BridgeError):
    """The invocation itself is wrong (incompatible inputs). CLI exit 2."""

    exit_code = 2


class FormatError(BridgeError):
    """A file exists but is corrupt or inconsistent with its manifest."""

    exit_code = 1
