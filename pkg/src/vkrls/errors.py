"""Exception types raised by the solvers."""


class VkrlsError(Exception):
    """Base class for all library errors."""


class DimensionError(VkrlsError, ValueError):
    pass


class NotPositiveDefiniteError(VkrlsError, ArithmeticError):
    """Cholesky met a non-positive pivot.

    ``index`` is the 0-based column at which the pivot failed.
    """

    def __init__(self, index, pivot=None):
        self.index = index
        self.pivot = pivot
        super().__init__(
            f"matrix is not numerically positive definite "
            f"(non-positive pivot at column {index})"
        )


class SingularTriangularError(VkrlsError, ArithmeticError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"triangular matrix is singular (zero diagonal at {index})")


class ZeroColumnError(VkrlsError, ValueError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"column {index} is zero")


class ZeroRowError(VkrlsError, ValueError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"row {index} is zero")


class NonpositiveDiagonalError(VkrlsError, ValueError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"diagonal entry {index} is not positive")


class NotConjugateClosedError(VkrlsError, ValueError):
    pass


class ConvergenceError(VkrlsError, ArithmeticError):
    pass


class RankDeficientBasisError(VkrlsError, ArithmeticError):
    pass
