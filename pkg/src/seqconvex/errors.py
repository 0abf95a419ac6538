"""Exception types shared across the package."""


class SeqConvexError(Exception):
    """Base class for all package errors."""


class DimensionError(SeqConvexError):
    """Vector lengths or space tags do not match the operation's contract."""


class TagError(SeqConvexError):
    """A space tag is used in a role it does not support (e.g. its dual is not modeled)."""


class UnsupportedTag(TagError):
    """The requested construction is not available for this norm tag."""


class NonFiniteObjective(SeqConvexError):
    """The objective evaluated to +inf (or NaN) on every probed feasible point."""


class NonFiniteEvaluation(SeqConvexError):
    """A function evaluation returned a non-finite value at a probe point."""


class BudgetExceeded(SeqConvexError):
    """Solver ran out of iterations before certifying the requested gap.

    Carries the best value found so the caller can decide whether an
    uncertified answer is acceptable.
    """

    def __init__(self, best_value, best_point, iterations):
        super().__init__(
            f"budget exhausted after {iterations} iterations; "
            f"best value {best_value!r} is not gap-certified"
        )
        self.best_value = best_value
        self.best_point = best_point
        self.iterations = iterations
        self.certified_gap = False


class GridTooLarge(SeqConvexError):
    """A grid oracle would exceed the configured point cap."""


class NotInDomain(SeqConvexError):
    """A point violates polytope membership beyond the allowed tolerance."""


class SetupError(SeqConvexError):
    """Required metadata (e.g. a known conjugate) is missing for this check."""
