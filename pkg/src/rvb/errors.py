"""Exception types shared across the package."""


class DomainError(ValueError):
    """Arguments fall outside the mathematical domain of an operation."""


class CapacityError(ValueError):
    """Requested register is too large for dense state-vector storage."""


class SymmetryError(ValueError):
    """A state fails a symmetry precondition (e.g. in-row permutation invariance)."""
