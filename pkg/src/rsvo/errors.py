"""Exception types raised across the package."""


class RsvoError(Exception):
    """Base class for all package errors."""


class DegeneratePair(RsvoError, ValueError):
    """Both personality scores of a pair are zero."""


class OutOfRange(RsvoError, ValueError):
    """A social value orientation angle lies outside [0, pi/2]."""


class UnsafeStart(RsvoError):
    """Some pair of agents starts inside the unsafe region."""


class InfeasibleError(RsvoError):
    """A hard-constrained QP had an empty feasible set."""


class ValidationError(RsvoError, ValueError):
    """A scenario field failed validation."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class ParseError(RsvoError, ValueError):
    """A scenario file could not be parsed."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class IoError(RsvoError, OSError):
    """Reading or writing an output file failed."""

    def __init__(self, path, message):
        self.path = str(path)
        super().__init__(f"{self.path}: {message}")
