"""Exception types shared across the package.

The CLI maps these onto exit codes: validation problems exit 2, vacancy where
attainment was required exits 3, property-check findings exit 4.
"""


class PseudoskelError(Exception):
    """Base class for all package errors."""


class ValidationError(PseudoskelError):
    """Malformed input: bad scene document, violated precondition, bad shape."""


class DimensionMismatchError(ValidationError):
    """Vector length does not match the signature dimension."""


class SignatureMismatchError(ValidationError):
    """Two objects were built against different signatures."""


class DependentVectorsError(ValidationError):
    """Span classification needs two linearly independent vectors."""


class EmptyDomainError(ValidationError):
    """A parametric piece has an empty parameter domain."""


class NonFiniteValueError(PseudoskelError):
    """A piece evaluated to NaN or infinity while sampling."""


class EmptySetError(ValidationError):
    """A set descriptor produced no sample points."""


class BoundaryParameterError(ValidationError):
    """Tangent directions need a parameter interior to the piece domain."""


class PointListHasNoTangentError(ValidationError):
    """Point-list pieces carry no tangent information."""


class VacantPointError(PseudoskelError):
    """The infimum was not attained where attainment was required."""


class VacantProbeError(VacantPointError):
    """A limit-check probe point turned out vacant."""


class OnMedialAxisError(PseudoskelError):
    """The gradient formula needs a unique closest cluster."""


class AnchorNotOnSetError(ValidationError):
    """The anchor point is not within the cluster radius of the sampled set."""


class DirectionNotInNormalConeError(PseudoskelError):
    """The ray membership predicate already fails at the first probe."""


class SectionHitsMedialAxisError(PseudoskelError):
    """A section sample has more than one closest cluster."""


class TransversalityError(ValidationError):
    """The section is too well aligned with the closest-point direction."""


class EmptyInWindowError(ValidationError):
    """A point sample has no points inside the comparison window."""


class SceneParseError(ValidationError):
    """The scene document could not be parsed."""
