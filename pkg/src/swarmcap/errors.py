"""Exception hierarchy shared by the optimizers and the CLI."""


class SwarmCapError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(SwarmCapError, ValueError):
    pass


class FeasibilityError(SwarmCapError):
    """No formation satisfies the requested constraint family.

    ``family`` names the violated constraint group (``"C1"`` .. ``"C5"``) when
    it is known.
    """

    def __init__(self, message, family=None, partial=None):
        super().__init__(message)
        self.family = family
        self.partial = partial


class CharacterizationUnavailableError(SwarmCapError):
    """More users than orthogonal directions: no closed form applies."""


class SolverError(SwarmCapError):
    """The convex kernel failed to converge."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []
