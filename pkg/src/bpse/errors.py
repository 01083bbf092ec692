"""Exception hierarchy shared by every bpse subpackage."""


class BpseError(Exception):
    """Base class for all errors raised by bpse."""


class ConfigError(BpseError, ValueError):
    pass


class ShapeError(BpseError, ValueError):
    pass


class FormatError(BpseError, ValueError):
    """Malformed file contents (bad header, truncated payload)."""


class UnsupportedError(BpseError, ValueError):
    """Well-formed input that uses a codec or feature we do not handle."""


class TooShortError(BpseError, ValueError):
    pass


class DegenerateSignalError(BpseError, ValueError):
    pass


class CoverageError(BpseError, KeyError):
    """A symbol is missing from a mapping table."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class AlignmentError(BpseError, ValueError):
    pass


class NumericsError(BpseError, FloatingPointError):
    pass


class UsageError(BpseError, RuntimeError):
    pass


class DependencyError(BpseError, RuntimeError):
    """A pipeline stage was invoked before the stage it depends on."""


class IoError(BpseError, OSError):
    pass
