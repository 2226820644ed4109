"""Exception types raised across the package."""


class EdgeSenseError(Exception):
    """Base class for all package errors."""


class InfeasibleCoverage(EdgeSenseError):
    pass


class RadiusOutOfRange(EdgeSenseError, ValueError):
    pass


class MissingLink(EdgeSenseError):
    pass


class LinkNotOwned(EdgeSenseError):
    pass


class BrokenPath(EdgeSenseError):
    pass


class NotFixedSensor(EdgeSenseError, ValueError):
    pass


class BadL1(EdgeSenseError, ValueError):
    pass


class ShapeMismatch(EdgeSenseError, ValueError):
    pass


class LengthMismatch(EdgeSenseError, ValueError):
    pass


class DivergedLoss(EdgeSenseError, FloatingPointError):
    pass


class MissingParams(EdgeSenseError):
    pass


class ConfigError(EdgeSenseError):
    pass


class ParseError(ConfigError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class ValidationError(ConfigError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")
