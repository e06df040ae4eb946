"""
Exception hierarchy for siegel-green.

Library code raises these; only the CLI turns them into exit codes:
- 2: bad input or configuration
- 3: recursion did not converge
- 4: a numerical invariant was breached
- 5: a sampled property failed (verify)
"""

from typing import Any, Optional


class SiegelGreenError(Exception):
    """Base class. ``exit_code`` is what the CLI returns for this error."""

    exit_code = 4


# ---------------------------------------------------------------------------
# Input / configuration (exit 2)
# ---------------------------------------------------------------------------


class ConfigError(SiegelGreenError, ValueError):
    exit_code = 2


class DimensionMismatch(SiegelGreenError, ValueError):
    exit_code = 2


class NotSymmetric(SiegelGreenError, ValueError):
    exit_code = 2


class InvalidParameter(SiegelGreenError, ValueError):
    exit_code = 2


class OutsideBand(SiegelGreenError, ValueError):
    """Real energy outside the interior of I_D where Im Z_λ > 0 is required."""

    exit_code = 2


class SizeCap(SiegelGreenError, ValueError):
    exit_code = 2


class GapViolation(SiegelGreenError, ValueError):
    exit_code = 2


# ---------------------------------------------------------------------------
# Convergence (exit 3)
# ---------------------------------------------------------------------------


class NoConvergence(SiegelGreenError, RuntimeError):
    exit_code = 3

    def __init__(self, message: str, depth: int = 0, residual: float = float("nan"),
                 trial: Optional[int] = None):
        super().__init__(message)
        self.depth = depth
        self.residual = residual
        self.trial = trial


# ---------------------------------------------------------------------------
# Numerical invariant breach (exit 4)
# ---------------------------------------------------------------------------


class NumericalError(SiegelGreenError, ArithmeticError):
    exit_code = 4


class NonHermitian(NumericalError):
    pass


class NotPositiveDefinite(NumericalError):
    pass


class Singular(NumericalError):
    pass


class InvariantBreach(NumericalError):
    pass


class EigenvalueOnContour(NumericalError):
    pass


class QuadratureNotConverged(NumericalError):
    pass


class NotAGraph(NumericalError):
    pass


# ---------------------------------------------------------------------------
# Property suites (exit 5)
# ---------------------------------------------------------------------------


class PropertyViolation(SiegelGreenError, AssertionError):
    exit_code = 5

    def __init__(self, message: str, counterexample: Optional[dict[str, Any]] = None):
        super().__init__(message)
        self.counterexample = counterexample or {}
