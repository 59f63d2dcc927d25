"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class HeisenbergIetError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(HeisenbergIetError, ValueError):
    """Input data violates a structural requirement."""


class NonPositiveLength(ValidationError):
    pass


class NotABijection(ValidationError):
    pass


class ReduciblePermutation(ValidationError):
    pass


class OutOfDomain(HeisenbergIetError, ValueError):
    """A point lies outside the half-open base interval [0, |I|)."""


class TauNotInCone(ValidationError):
    pass


class InconsistentSystem(HeisenbergIetError, ValueError):
    """A height vector is not in the image of the Omega matrix."""


class NotWeilIntegral(ValidationError):
    pass


class HeightsNotInCone(ValidationError):
    pass


class MeshTooCoarse(HeisenbergIetError, ValueError):
    pass


class GridTooCoarse(HeisenbergIetError, ValueError):
    pass


class ChartExit(HeisenbergIetError):
    """A chart-local move would leave the current rectangle."""


class WindowTooLong(HeisenbergIetError, ValueError):
    pass


class TowerConstructionFailed(HeisenbergIetError):
    pass


class ParseError(HeisenbergIetError):
    """Config text could not be parsed; carries the offending line/field."""

    def __init__(self, message: str, *, line: int | None = None, field: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.field = field
