"""Exception hierarchy.

Expected numerical failures inside Markov kernels (a RATTLE solve that
diverges, a projection that does not converge) are turned into MCMC
rejections by the kernels themselves; the exceptions below surface only
when the low-level operations are called directly.
"""


class RechmcError(Exception):
    """Base class for all package errors."""


class SingularGram(RechmcError):
    """The Gram matrix of the constraint Jacobian is not positive definite."""


class SingularCurvatureFactor(RechmcError):
    """A tangent curvature determinant vanished (point left the valid tube)."""


class NoConvergence(RechmcError):
    """Newton projection failed within the iteration budget."""


class NormalCapExceeded(RechmcError):
    """Normal coordinate of a projection exceeds the configured cap."""

    def __init__(self, norm, cap):
        super().__init__(f"|v| = {norm:.6g} exceeds cap {cap:.6g}")
        self.norm = norm
        self.cap = cap


class NonFiniteState(RechmcError):
    """An integrator produced a non-finite coordinate."""


class PositionSolveFailed(RechmcError):
    """RATTLE position-stage multiplier solve did not converge."""


class ExchangeNotAdmissible(RechmcError):
    """A joint state failed the reversible involution check."""


class ConstructionError(RechmcError):
    """Invalid benchmark model parameters."""


class InvalidInitialPoint(RechmcError):
    """Replica driver initial state violates its preconditions."""


class TooShort(RechmcError):
    """Series too short for the requested diagnostic."""


class ShapeMismatch(RechmcError):
    """Chains passed to a multi-chain diagnostic have incompatible shapes."""


class ConfigError(RechmcError):
    """Experiment configuration failed to parse or validate."""
