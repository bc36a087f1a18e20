"""Exception hierarchy shared by all modules."""


class ToralDynError(Exception):
    """Base class for every error raised by this package."""


class PrecisionExhausted(ToralDynError):
    pass


class NeutralSpectrum(ToralDynError):
    pass


class DimensionMismatch(ToralDynError, ValueError):
    pass


class ReducibleSeed(ToralDynError, ValueError):
    pass


class WindowTooCoarse(ToralDynError, ValueError):
    pass


class EmptyShift(ToralDynError):
    pass


class DegenerateShift(ToralDynError):
    pass


class DepthTooCoarse(ToralDynError, ValueError):
    pass


class InvalidGeometry(ToralDynError, ValueError):
    pass


class EntropyOutOfRange(ToralDynError, ValueError):
    pass


class IncompatibleGrid(ToralDynError, ValueError):
    pass


class RankTooLow(ToralDynError, ValueError):
    pass


class ConfigError(ToralDynError, ValueError):
    """Invalid experiment configuration; ``field`` and ``line`` locate the problem."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
