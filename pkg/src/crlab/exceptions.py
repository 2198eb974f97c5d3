"""Exception types raised by crlab operations."""


class CRLabError(Exception):
    """Base class for all crlab errors."""


class CoefficientError(CRLabError):
    """Coefficient data fails validation (non-symmetric, non-periodic, NaN)."""


class ResolutionError(CRLabError):
    """Grid or mode resolution too small for the requested computation."""


class FredholmWeightError(CRLabError):
    """A weight exponent collides with the asymptotic spectrum."""


class AmbiguousWindowError(CRLabError):
    """A counting-window endpoint sits on an eigenvalue within tolerance."""


class DegenerateEndError(CRLabError):
    """An asymptotic operator required to be nondegenerate has a zero eigenvalue."""


class TrackingError(CRLabError):
    """Adaptive eigenvalue tracking exceeded its refinement budget."""


class AssemblyError(CRLabError):
    """Discrete operator assembly failed an internal consistency check."""


class NumericalError(CRLabError):
    """A dense linear-algebra kernel (eigensolver, SVD) failed."""


class IndecisiveRankError(CRLabError):
    """Singular-value gap too small to decide the numerical rank under a strict policy."""


class InstabilityError(CRLabError):
    """Computed index failed to stabilize under grid refinement."""


class IncompatibleEndsError(CRLabError):
    """Two problems cannot be glued because their shared-end data disagree."""


class GraphError(CRLabError):
    """A configuration graph violates its structural invariants."""


class ConfigError(CRLabError):
    """An experiment configuration is malformed."""

    def __init__(self, message, pointer=""):
        super().__init__(f"{pointer}: {message}" if pointer else message)
        self.pointer = pointer
