"""Exception hierarchy shared by all hslab modules.

The CLI maps these onto exit codes: validation problems exit 1,
convergence/accuracy problems exit 2.
"""


class HslabError(Exception):
    """Base class for all hslab errors."""


class DomainValidationError(HslabError, ValueError):
    """An argument violates a documented precondition."""


class DivergentIntegralError(DomainValidationError):
    """A requested integral does not converge for these parameters."""

    def __init__(self, field, detail=""):
        self.field = field
        msg = f"integral '{field}' diverges"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class CoercivityError(DomainValidationError):
    """The operator (Laplacian + potential) is not coercive on the grid."""


class ResolutionError(HslabError):
    """A grid is too coarse, or a solve failed its residual target."""


class QuadratureError(HslabError):
    """Numerical integration failed or two integration routes disagree."""


class FitError(HslabError):
    """An asymptotic fit is inconclusive; carries diagnostics."""

    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class FitRangeError(FitError):
    """The requested fit window is too wide for the quadratic model."""


class OptimizerError(HslabError):
    """The constrained minimizer failed to make progress."""


class PropertyViolationError(HslabError):
    """A mathematical ordering/positivity property failed on the grid."""
