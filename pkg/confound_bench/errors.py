"""
errors.py – Exception hierarchy.
Every domain error is a ValueError so HTTP routes can map it to 400.
"""


class ConfoundBenchError(ValueError):
    """Root of all domain errors."""


class SingularDesign(ConfoundBenchError):
    """Design matrix has effective rank below its column count."""


class NotPositiveDefinite(ConfoundBenchError):
    pass


class DegenerateWithin(ConfoundBenchError):
    """Within-cluster transform is undefined (cluster size 1)."""


class InvalidCovariance(ConfoundBenchError):
    pass


class UnknownAxis(ConfoundBenchError):
    pass


class ZeroDenominator(ConfoundBenchError):
    pass


class EmptySeries(ConfoundBenchError):
    pass


class ParseError(ConfoundBenchError):
    """Config file is not valid JSON. Carries the offending location."""

    def __init__(self, path: str, message: str, line: int | None = None, column: int | None = None) -> None:
        self.path = path
        self.line = line
        self.column = column
        where = f"{path}:{line}:{column}" if line is not None else path
        super().__init__(f"{where}: {message}")


class SchemaError(ConfoundBenchError):
    """Config parsed but violates the schema. Lists every violation."""

    def __init__(self, violations: list[str]) -> None:
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class WeakInstrumentWarning(UserWarning):
    """First-stage partial F below the conventional threshold of 10."""
