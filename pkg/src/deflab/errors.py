"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input matrix, state, POVM or file failed a structural check."""


class PreconditionError(ValueError):
    """An operation was called outside its domain (e.g. at a breakpoint)."""


class DeficiencyPreconditionError(PreconditionError):
    """The source experiment is not 2-deficiency-dominating the target."""


class SolverError(RuntimeError):
    """An iterative solver stopped without reaching its tolerance."""


class ConstructionError(PreconditionError):
    """A constructive step found no object with the required properties."""
