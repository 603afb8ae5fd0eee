"""
Toolkit Errors - Exception hierarchy shared by the solver modules

Argument problems that are plain value errors stay ValueError subclasses so callers
can catch either the toolkit base class or the builtin.
"""


class Sr3ToolkitError(Exception):
    """Base class for every error raised by the toolkit"""


class DimensionMismatchError(Sr3ToolkitError, ValueError):
    """Vector or operator sizes do not conform"""


class UnsupportedShapeError(Sr3ToolkitError, ValueError):
    """Matrix pair falls outside the supported GSVD shape regimes"""


class RankDeficientError(Sr3ToolkitError):
    """Stacked operator [A; L] does not have full column rank"""


class InfeasiblePointError(Sr3ToolkitError, ValueError):
    """Point handed to a bound or gap evaluation violates the l1 constraint"""


class SingularSystemError(Sr3ToolkitError):
    """Normal-equations matrix could not be factored"""


class NonConvergenceError(Sr3ToolkitError):
    """Solver hit its iteration cap (only raised when strict mode asks for it)"""


class ManifestMismatchError(Sr3ToolkitError):
    """Stored problem data differs from what its manifest regenerates"""
