"""
Exception hierarchy.

Operations raise; only the command-line layer turns exceptions into exit
codes (2 for precondition failures, 3 for budget or convergence failures).
"""
from typing import Optional

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PRECONDITION = 2
EXIT_COMPUTATION = 3


class NodalLabError(Exception):
    """Base class for all library errors."""
    exit_code = EXIT_COMPUTATION


class PreconditionError(NodalLabError):
    """An operation was called outside its precondition."""
    exit_code = EXIT_PRECONDITION


class DomainViolation(PreconditionError):
    """A point, ball or cube reaches outside the oracle's declared domain."""

    def __init__(self, radius: float, domain_radius: float, what: str = "point"):
        self.radius = radius
        self.domain_radius = domain_radius
        super().__init__(
            f"{what} reaches radius {radius:.6g} outside domain radius {domain_radius:.6g}"
        )


class UnsupportedDimension(PreconditionError):
    """Dimension not handled by the requested operation."""


class LowFrequencyError(PreconditionError):
    """Frequency at or below the gate; callers should take the naive-bound path."""

    def __init__(self, beta: float, gate: float):
        self.beta = beta
        self.gate = gate
        super().__init__(f"low frequency: beta(p, r/2) = {beta:.6g} <= {gate:.6g}")


class SamplingTooCoarse(PreconditionError):
    """Sampled function too coarse for the plateau finder."""


class NotAZero(PreconditionError):
    """The point is not a zero of the field."""


class ComputationError(NodalLabError):
    """A computation could not finish within its numerical budget."""
    exit_code = EXIT_COMPUTATION


class QuadratureFloorError(ComputationError):
    """H is at the quadrature floor, so the field vanishes on the sphere to precision."""


class BudgetExceeded(ComputationError):
    """A size budget (partition, tunnel cells, lattice) would be exceeded."""


class ConvergenceError(ComputationError):
    """A refinement loop did not reach its tolerance."""


class ClaimSearchError(ComputationError):
    """No valid k0 exists up to k_max."""

    def __init__(self, largest_violation: int, k_max: int):
        self.largest_violation = largest_violation
        self.k_max = k_max
        super().__init__(
            f"no valid k0 <= {k_max}: largest violating k is {largest_violation}"
        )


def exit_code_for(exc: BaseException) -> Optional[int]:
    """Map an exception to a CLI exit code, or None if it is not ours."""
    if isinstance(exc, NodalLabError):
        return exc.exit_code
    return None
