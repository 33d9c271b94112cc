"""Exception hierarchy shared across the package."""


class ViOptError(Exception):
    """Base class for all solver-level failures."""


class LinearSolveError(ViOptError):
    """A sparse or dense linear solve failed or stagnated."""


class MaxIterationsError(ViOptError):
    """An iterative routine hit its iteration cap without converging."""


class NoConvergenceError(ViOptError):
    """A complementarity subproblem could not be resolved reliably."""


class BiactiveNonemptyError(ViOptError):
    """The linear-system derivative path requires an empty biactive set."""


class SingularModelError(ViOptError):
    """The quadratic model matrix could not be inverted to tolerance."""


class NoPatternAcceptedError(ViOptError):
    """Sign-pattern enumeration rejected every candidate pattern."""


class ZeroGradientError(ViOptError):
    """Step computation was asked for a step at a zero gradient."""
