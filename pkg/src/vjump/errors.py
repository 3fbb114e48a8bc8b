"""Exception taxonomy shared across the package."""


class VJumpError(Exception):
    """Base class for all package-specific failures."""


class ConfigError(VJumpError):
    """Invalid or unparseable configuration input."""

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class ZeroMomentum(VJumpError):
    """Operation undefined at p = 0 (the singular integrand has no scale)."""


class DenominatorNotPositive(VJumpError):
    """Resolvent evaluated at a trial value h with 1 + h <= mu(p)."""


class NoBracket(VJumpError):
    """Implicit equation could not be bracketed; indicates a mass or
    representation bug, not a data error."""


class DegenerateMaximizer(VJumpError):
    """The maximizing face of the support function is not a single point."""


class OutsideHull(VJumpError):
    """Velocity certified to lie outside the convex hull of the support."""


class CflViolation(VJumpError):
    """Requested time step exceeds the stability bound."""


class BoundViolation(VJumpError):
    """A maximum-principle bound failed beyond tolerance; scheme bug."""


class UnderflowRisk(VJumpError):
    """Density formulation would underflow; use the potential solver."""
