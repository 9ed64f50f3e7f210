"""Error hierarchy shared by the simulator modules.

Every domain error is also a ValueError, so callers that only care about
"bad input" can keep catching ValueError.
"""
from typing import Optional


class WaveSimError(Exception):
    """Base class for all simulator errors."""


class GridError(WaveSimError, ValueError):
    pass


class ModulationError(WaveSimError, ValueError):
    pass


class PotentialError(WaveSimError, ValueError):
    pass


class PlanError(WaveSimError, ValueError):
    pass


class DiagnosticsError(WaveSimError, ValueError):
    pass


class FloquetError(WaveSimError, ValueError):
    pass


class FloquetSingularError(FloquetError):
    """The coupled-channel matrix is singular at working precision (resonance)."""


class FloquetConvergenceError(FloquetError):
    """The direct solve finished but the residual exceeds the tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class ConfigError(WaveSimError, ValueError):
    """Scenario configuration rejected; `path` names the offending field."""

    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
