"""Exception types raised across the package."""


class CritBRWError(Exception):
    """Base class for all package errors."""


class IncompatibleSize(CritBRWError, ValueError):
    pass


class RetryExhausted(CritBRWError, RuntimeError):
    pass


class TooLarge(CritBRWError, ValueError):
    pass


class Disconnected(CritBRWError, ValueError):
    pass


class NoCutPoints(CritBRWError, ValueError):
    pass


class DegenerateTriangle(CritBRWError, ValueError):
    pass


class SolverDivergence(CritBRWError, RuntimeError):
    pass


class NotInSameComponent(CritBRWError, ValueError):
    pass


class NonPositiveInput(CritBRWError, ValueError):
    pass


class PathTooShort(CritBRWError, ValueError):
    pass


class DegenerateSample(CritBRWError, ValueError):
    pass


class StepTooCoarse(CritBRWError, ValueError):
    pass


class NoPivotalFound(CritBRWError, RuntimeError):
    pass


class MissingManifest(CritBRWError, FileNotFoundError):
    pass


class ConfigError(CritBRWError, ValueError):
    """Invalid run configuration; ``line`` points into the config file when known."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)
