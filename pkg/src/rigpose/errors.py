"""Exception types raised by the rigpose estimation stack.

Everything derives from RigPoseError so callers can catch the whole family.
Numerical-degeneracy errors (IllConditioned, SingularInnovationCovariance,
ParallelRays, ...) derive from DegenerateGeometry: the pipelines treat them
as recoverable per-frame conditions, not hard failures.
"""


class RigPoseError(Exception):
    """Base class for all rigpose errors."""


class InputError(RigPoseError):
    """Malformed user input (files, configs, CLI arguments)."""


class DegenerateGeometry(RigPoseError):
    """Numerically degenerate configuration; usually recoverable per frame."""


class NonOrthonormalInput(InputError):
    """A matrix expected to be a rotation is not orthonormal."""


class GimbalProximity(DegenerateGeometry):
    """Pitch too close to +-pi/2 for a stable Euler decomposition."""


class InvalidCameraIndex(InputError):
    """Camera index outside the rig's camera list."""


class BehindCamera(DegenerateGeometry):
    """A point has nonpositive depth in the camera it should project into."""


class CoincidentCenters(DegenerateGeometry):
    """Two camera centers coincide; no epipolar geometry exists."""


class DegenerateLine(DegenerateGeometry):
    """An epipolar line with vanishing direction coefficients."""


class ParallelRays(DegenerateGeometry):
    """Back-projected rays too close to parallel to triangulate."""


class EmptyBatch(InputError):
    """A measurement batch with no entries."""


class SingularInnovationCovariance(DegenerateGeometry):
    """EKF innovation covariance is not invertible; caller may skip the update."""


class WrongCameraCount(InputError):
    """The scale system needs exactly the three non-reference cameras."""


class IllConditioned(DegenerateGeometry):
    """Scale system too ill-conditioned to solve; fall back to previous scales."""


class MissingCamera(InputError):
    """Pose fusion requires a pose from every camera of the rig."""


class InsufficientMatches(DegenerateGeometry):
    """Fewer than four 3D-2D matches supplied to the pose solver."""


class Diverged(DegenerateGeometry):
    """Iterative pose refinement failed to reduce the residual."""


class InsufficientFeatures(DegenerateGeometry):
    """Too few validated feature matches to start a sequence."""


class LengthMismatch(InputError):
    """Series compared against a trajectory of a different length."""


class EstimationFailure(RigPoseError):
    """A sequence run aborted for numerical reasons (non-finite state)."""
