"""Exception types shared across the package."""


class RashgamError(Exception):
    """Base class for all domain errors raised by this package."""


class DataError(RashgamError):
    """Malformed input data (bad CSV, inconsistent arity, bad labels)."""


class OutOfRangeError(DataError):
    """A feature value falls outside its binning edges."""

    def __init__(self, feature: str, row: int, value: float):
        self.feature = feature
        self.row = row
        self.value = value
        super().__init__(
            f"value {value!r} of feature {feature!r} in row {row} is outside the bin edges"
        )


class BinningSpecError(DataError):
    """Bin edges are not strictly increasing or otherwise invalid."""


class DimensionMismatchError(RashgamError):
    """Vector or matrix dimensions do not agree."""


class ConvergenceError(RashgamError):
    """An iterative solver failed to converge; carries the last iterate."""

    def __init__(self, message: str, last_iterate=None, grad_norm=None):
        self.last_iterate = last_iterate
        self.grad_norm = grad_norm
        super().__init__(message)


class EmptyRashomonError(RashgamError):
    """The requested threshold lies at or below the minimum achievable loss."""


class PlanError(RashgamError):
    """A merge plan is invalid (overlapping or cross-feature groups)."""


class EnumerationGuardError(RashgamError):
    """A per-feature bin count exceeds the sign-enumeration guard."""

    code = "enumeration_guard"
