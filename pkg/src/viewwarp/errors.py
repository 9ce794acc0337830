"""Exception hierarchy shared across the library."""


class ViewWarpError(Exception):
    """Base class for all library errors."""


class NonFinite(ViewWarpError):
    """An input contained NaN or Inf where finite values are required."""


class BehindCamera(ViewWarpError):
    """A transformed point has non-positive depth and cannot be projected."""


class DimensionMismatch(ViewWarpError):
    """Grid dimensions disagree with each other or with the camera."""


class DegenerateSize(ViewWarpError):
    """A grid dimension is too small to be meaningful."""


class ShapeMismatch(ViewWarpError):
    """Token grids or projection matrices have incompatible shapes."""


class IndexOutOfRange(ViewWarpError):
    """A token or pixel index lies outside the valid range."""


class MissingInput(ViewWarpError):
    """A required input for the requested conditioning kind was not supplied."""


class DegenerateConfiguration(ViewWarpError):
    """Correspondences do not constrain the pose (rank-deficient system)."""


class NoConvergence(ViewWarpError):
    """Iterative refinement exceeded its iteration cap."""


class InsufficientInliers(ViewWarpError):
    """RANSAC found no consensus set of the minimum size."""


class InvalidDepthAtMatch(ViewWarpError):
    """A match references a pixel with no valid depth."""


class SequenceTooShort(ViewWarpError):
    """A frame sequence is shorter than the minimum pairing interval."""


class MissingConfidence(ViewWarpError):
    """A record lacks the confidence value required for filtering."""


class MalformedLayout(ViewWarpError):
    """The dataset directory does not follow the expected layout."""
