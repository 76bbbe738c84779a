"""Exception types shared across the package."""


class CertsegError(Exception):
    """Base class for all certseg errors."""


class InputError(CertsegError, ValueError):
    """Invalid user-supplied data (parameters, images, configs)."""


class DegenerateClusteringError(InputError):
    """2-means clustering collapsed (constant input image)."""


class StepSizeError(CertsegError):
    """Primal/dual step sizes violate the operator-norm safety condition."""


class NotConvergedError(CertsegError):
    """Iteration hit its cap without meeting the stopping tolerance."""


class InfeasibleDualError(CertsegError):
    """Dual field violates |q| <= 1; the error certificate would be void."""
