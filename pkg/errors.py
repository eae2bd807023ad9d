"""
Exception types shared across the simulator
"""

from typing import Optional


class BathSimError(Exception):
    """Base class for all simulator errors"""


class ConfigError(BathSimError):
    """Invalid parameters or configuration document"""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ComputationError(BathSimError):
    """Non-finite intermediate while evaluating a decoherence factor"""

    def __init__(self, message: str, t: Optional[float] = None):
        self.t = t
        super().__init__(f"{message} at t={t!r}" if t is not None else message)


class StructureError(BathSimError):
    """Density matrix is not of the expected X-form"""


class OracleConvergenceError(BathSimError):
    """Local refinement of the trace-norm minimization did not converge"""

    def __init__(self, message: str, best_value: float):
        self.best_value = best_value
        super().__init__(f"{message} (best value {best_value:.12g})")
