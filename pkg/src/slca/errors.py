"""Exception types raised across the package."""


class ZeroAtom(ValueError):
    def __init__(self, index):
        super().__init__(f"dictionary column {index} has (near) zero norm")
        self.index = index


class DimensionMismatch(ValueError):
    pass


class DomainViolation(ValueError):
    """Raised when a nonnegativity-constrained vector has negative entries."""

    def __init__(self, indices):
        self.indices = list(int(i) for i in indices)
        super().__init__(f"negative entries at indices {self.indices}")


class NumericalBlowup(RuntimeError):
    pass


class ExplodingRate(RuntimeError):
    pass


class EmptyWindow(ValueError):
    pass


class CoverageMismatch(ValueError):
    pass


class NotConverged(UserWarning):
    """Warning category emitted when an iterative solver hits its budget."""
