"""Exception hierarchy shared by all modules."""


class ValidationError(ValueError):
    """Input fails a precondition (bad shape, non-SPD form, missing seed...)."""


class InvalidBodyError(ValidationError):
    """A convex body violates its representation invariants."""


class UnboundedBodyError(InvalidBodyError):
    """An H-polytope whose constraints do not bound a compact set."""


class DimensionMismatchError(ValidationError):
    pass


class NumericalError(ArithmeticError):
    """A computation could not reach its accuracy target."""


class GridLeakageError(ValidationError):
    """Grid amplitude at the boundary is too large for a faithful transform."""
