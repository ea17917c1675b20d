"""Exception types shared across the library."""


class AntplanError(Exception):
    """Base class for all antplan errors."""


class UnknownIdError(AntplanError, KeyError):
    """An identifier does not name a known PM or VM."""


class InvalidProblemError(AntplanError, ValueError):
    """A consolidation problem violates its structural invariants."""


class InfeasiblePlanError(AntplanError, ValueError):
    """Replaying a migration plan would violate a capacity or ordering constraint."""


class EmptyPlanError(AntplanError, ValueError):
    """An operation that needs at least one migration got an empty plan."""


class NoFeasibleContinuation(AntplanError, RuntimeError):
    """Every tuple still open to an ant would overload its destination."""


class GenerationError(AntplanError, RuntimeError):
    """Workload generation could not produce a feasible initial placement."""


class DegenerateSampleError(AntplanError, ValueError):
    """A statistical test received a sample it cannot rank (all differences zero)."""
