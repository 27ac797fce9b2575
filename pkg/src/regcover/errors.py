"""Exception types shared across the toolkit."""


class RegcoverError(Exception):
    """Base class for all toolkit errors."""


class DomainError(RegcoverError):
    """Evaluation left the domain of a definable function (log/power of a
    non-positive base, division by zero, non-finite result)."""


class ScanTooCoarse(RegcoverError):
    """Root bracketing stayed inconsistent under repeated 2x refinement of
    the scan grid; the caller must increase the density ceiling."""


class NonFiniteFiber(RegcoverError):
    """A line restriction vanished identically: the fiber is not a finite
    set of points."""


class UnboundedSet(RegcoverError):
    """The operation needs a bounding box but the set declares none."""


class PointOutsideSet(RegcoverError):
    """A distance query was made from a point not in the open set."""


class DegenerateFiber(RegcoverError):
    """Both points project to the same base point; the ratio is undefined."""


class NoConvergence(RegcoverError):
    """Newton and the bisection fallback both failed to converge."""


class DomainViolation(RegcoverError):
    """The iteration hit a non-positive power base."""


class DegenerateFactor(RegcoverError):
    """The closed-form prefactor is too close to zero to divide by."""


class InsufficientSpan(RegcoverError):
    """Samples cover fewer than the required number of decades."""


class EmptyInput(RegcoverError):
    """An operation that needs at least one element received none."""


class SchemaError(RegcoverError):
    """A scenario file failed schema validation."""


class UnsupportedDimension(RegcoverError):
    """Rendering or construction is not available in this dimension."""


class NotRegularHere(RegcoverError):
    """The weak-regularity verdict failed at the query point, so the band
    inequalities do not apply."""


class DiscriminantFailure(RegcoverError):
    """The discriminant sweep could not stabilize."""


class NonCurveBoundary(RegcoverError):
    """The open set's boundary is not available as an equality-defined
    curve, so the band constructor cannot run."""
