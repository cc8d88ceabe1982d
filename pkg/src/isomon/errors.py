"""Exception hierarchy shared by all modules."""


class IsomonError(Exception):
    """Base class for all errors raised by this package."""


class ZeroPivot(IsomonError):
    """A leading principal minor vanished during pivot-free LU elimination."""

    def __init__(self, k: int, message: str = ""):
        self.k = k
        super().__init__(message or f"zero pivot at elimination step {k}")


class NotDiagonalizable(IsomonError):
    """A matrix required to be diagonalizable has a defective eigenvalue."""


class Unsupported(IsomonError):
    """Input outside the supported shape (ramified types, rank >= 2, ...)."""


class NotRealizable(IsomonError):
    """System cannot be put in factored form Q(x-T)^{-1}P + S."""


class ShapeMismatch(IsomonError):
    """Spectral type is not in the admissible domain of a type-level move."""


class NotARefinement(IsomonError):
    """Confluence undefined: neither partition refines the other."""


class DegenerateMap(IsomonError):
    """Moebius map with vanishing determinant."""


class ZeroEpsilon(IsomonError):
    """Separation parameter must be nonzero."""


class SpectralCollision(IsomonError):
    """An exponent collides with the spectrum it must avoid."""


class KernelDimension(IsomonError):
    """Weight-vector kernel does not have the expected dimension one."""


class DivideByZero(IsomonError):
    """A coordinate denominator vanished: non-generic orbit point."""


class NoSolution(IsomonError):
    """Multiplier construction has no solution at this parameter point."""


class NonUnique(IsomonError):
    """Multiplier admits freedom beyond the diagonal torus."""


class StepFloor(IsomonError):
    """Adaptive integrator needs steps below the floor: path too close to a singularity."""


class PoleAtCoincidence(IsomonError):
    """Hamiltonian evaluated at coinciding deformation parameters."""


class InvalidState(IsomonError):
    """A state or system violates its construction invariants."""
