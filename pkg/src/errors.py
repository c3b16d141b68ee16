from __future__ import annotations


class SimulationError(Exception):
    """Base class for every error raised by the simulator."""


class ParameterError(SimulationError, ValueError):
    """A size, range or count is outside what an operation accepts."""


class DimensionError(SimulationError, ValueError):
    """Matrix or array shapes do not line up."""


class NumericalError(SimulationError, ArithmeticError):
    """An iteration did not converge or a result broke a numerical contract."""


class ConfigError(SimulationError, ValueError):
    """A configuration document could not be parsed or validated.

    `diagnostics` holds one human-readable line per problem found.
    """

    def __init__(self, message: str, diagnostics: list[str] | None = None) -> None:
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])

    def __str__(self) -> str:
        base = super().__str__()
        if not self.diagnostics:
            return base
        return base + "\n" + "\n".join(f"  - {line}" for line in self.diagnostics)
