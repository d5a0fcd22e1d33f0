"""Exception types shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 2, numerical failures (small diagonals, non-convergence) with 3, and
invariant-suite failures with 1.
"""


class RowGossipError(Exception):
    """Base class for all package-specific errors."""


class InvalidGraphError(RowGossipError):
    """A graph violates a structural precondition (self-loops, size, ...)."""


class InvalidMatrixError(RowGossipError):
    """A matrix fails row-stochasticity, primitivity or support checks."""


class GenerationError(RowGossipError):
    """A random graph generator could not produce a connected instance."""


class ConvergenceError(RowGossipError):
    """An iterative solver stopped before reaching its residual target."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SmallDiagonalError(RowGossipError):
    """A diagonal estimate fell at or below the inversion floor.

    Carries the node index and the gossip round / iteration at which the
    too-small value appeared.
    """

    def __init__(self, node, step, value):
        super().__init__(
            f"diagonal estimate {value:.3e} at node {node}, step {step} "
            f"is at or below the inversion floor"
        )
        self.node = node
        self.step = step
        self.value = value


class InvalidWeightError(RowGossipError):
    """A weight vector that must be strictly positive is not."""


class ProbeError(RowGossipError):
    """An exact algebraic invariant probe exceeded its tolerance."""


class ConfigError(RowGossipError):
    """An experiment configuration is malformed or inconsistent."""


class RunAborted(RowGossipError):
    """An optimizer run failed mid-way; carries the records produced so far."""

    def __init__(self, message, partial, cause=None):
        super().__init__(message)
        self.partial = partial
        self.cause = cause
