"""
TWINDOT Exceptions
Error hierarchy shared by the library and the command-line front end
"""

from typing import Any, Dict, Optional


class TwinDotError(Exception):
    """Root of every error raised by twindot"""


class LayoutMismatchError(TwinDotError, ValueError):
    """Operators or states built on different Hilbert-space layouts"""


class ParameterError(TwinDotError, ValueError):
    """Physically invalid or out-of-domain input"""


class ConfigError(TwinDotError, ValueError):
    """Run configuration rejected; the message names the offending key(s)"""

    def __init__(self, message: str, keys: Optional[list] = None):
        super().__init__(message)
        self.keys = list(keys or [])


class SolverError(TwinDotError, RuntimeError):
    """
    Numerical failure (degenerate steady state, integration failure,
    defective eigenproblem)

    Attributes:
        diagnostics: solver-specific numbers (condition estimate, step size, ...)
    """

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ConvergenceError(SolverError):
    """Fock truncation did not converge within the allowed ceiling"""
