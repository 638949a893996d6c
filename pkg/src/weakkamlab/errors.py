"""Exception hierarchy shared by every module of the package."""


class WeakKamError(Exception):
    """Base class for all package errors."""


class ConfigError(WeakKamError, ValueError):
    """Invalid model description, grid size or option."""


class MaximizationDiverged(WeakKamError):
    """A fiberwise concave maximization ran out of budget."""


class EmptySlice(WeakKamError):
    """The sub-level set {p : H(x, p) <= c} is empty."""


class NonConvexFiber(WeakKamError):
    """The fiber Hessian dropped below the convexity floor."""


class WindowTooSmall(WeakKamError):
    """A Lax-Oleinik minimizer sits on the boundary of the search window."""


class DidNotConverge(WeakKamError):
    """An iteration hit its budget; ``partial`` holds the last iterate if any."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class BracketFailure(WeakKamError):
    """No feasible upper level was found for the critical-value bisection."""


class MethodDisagreement(WeakKamError):
    def __init__(self, message, branch=None, lo=None):
        super().__init__(message)
        self.branch = branch
        self.lo = lo


class NoSubsolutionAtLevel(WeakKamError):
    """The branch integrals do not straddle zero at the requested level."""


class VerificationFailed(WeakKamError):
    def __init__(self, message, worst_node=None, worst_margin=None):
        super().__init__(message)
        self.worst_node = worst_node
        self.worst_margin = worst_margin


class BoundaryCase(WeakKamError):
    """The only sub-solution at the critical level is forced; nothing is strict."""


class InconsistentLevel(WeakKamError):
    """The supplied level is neither interior- nor boundary-feasible."""


class BranchFold(WeakKamError):
    """The unstable branch stops being a graph inside the chart radius."""


class NotSymplectic(WeakKamError):
    """A monodromy matrix fails the symplectic test."""


class HypothesisNotSatisfied(WeakKamError):
    """The Aubry set is not a finite union of hyperbolic fixed points."""


class BlendMarginFailure(WeakKamError):
    def __init__(self, message, worst_node=None, worst_margin=None):
        super().__init__(message)
        self.worst_node = worst_node
        self.worst_margin = worst_margin
