"""Exception hierarchy shared by all modules."""


class CsymError(Exception):
    """Base class for every error raised by the package."""


class DomainError(CsymError, ValueError):
    """A field was evaluated outside its domain (log of non-positive, fractional
    power of a non-positive base, near-zero denominator, ...)."""


class UnsupportedOrder(CsymError):
    """A callable field cannot provide the requested derivative order."""


class InvalidParams(CsymError, ValueError):
    """Parameters violate a constraint of a catalogue entry or a family."""


class BoundaryCase(InvalidParams):
    """Parameters sit exactly on a boundary of a classification (t0 = 0, ...)."""


class UnsupportedDiffusivity(CsymError):
    """The diffusivity kind has no closed-form antiderivative/inverse pair."""


class SingularManifold(CsymError):
    """The manifold projection needs a division by a vanishing coefficient."""


class IncompatiblePair(CsymError):
    """A (system, ansatz) pair has no catalogued reduction."""


class UnsupportedOperator(CsymError):
    """No closed-form invariants are known for the operator."""


class StiffnessFailure(CsymError):
    """The adaptive step collapsed while the solution stayed bounded."""


class PositivityLoss(CsymError):
    """A grid component crossed the positivity guard of its diffusivity."""


class StepCollapse(CsymError):
    """The explicit time step fell below the admissible floor."""


class DegenerateErrors(CsymError, ValueError):
    """Errors passed to a convergence estimate are zero or non-monotone."""


class UsageError(CsymError):
    """Command-line usage error (exit code 2)."""
