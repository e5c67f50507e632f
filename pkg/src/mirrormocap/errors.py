"""Exception hierarchy shared across the pipeline stages."""


class MirrorMocapError(Exception):
    """Base class for all library errors."""


# --- geometry ---------------------------------------------------------------

class NonPositiveDepth(MirrorMocapError):
    """Point is behind or on the camera plane (z <= eps)."""


class NoIntersection(MirrorMocapError):
    """Pixel ray is parallel to the plane or meets it behind the camera."""


class NonUnitNormal(MirrorMocapError):
    """Plane normal is not unit length within tolerance."""


class NoMirrorIntersection(MirrorMocapError):
    """Ray never crosses the mirror plane inside its parameter range."""


# --- calibration ------------------------------------------------------------

class CalibrationError(MirrorMocapError):
    """Base for step-1 failures."""


class WrongPersonCount(CalibrationError):
    """Frame does not contain exactly two usable detections."""


class AmbiguousAssociation(CalibrationError):
    """Real/mirror assignment cannot be decided for this frame."""


class DegenerateMotion(CalibrationError):
    """Ankle pixels carry no depth variation; focal length unobservable."""


class NoConvergence(CalibrationError):
    """Calibration residual stayed above threshold after optimization."""


class NoValidFrames(CalibrationError):
    """No frame survived the validity filters."""


class AnklesCoincide(CalibrationError):
    """Real and mirror ankle points coincide (person touching the mirror)."""


class DegenerateGeometry(CalibrationError):
    """Camera view is too close to parallel or orthogonal to the mirror."""


# --- skeleton / lifting -----------------------------------------------------

class DegenerateRotation(MirrorMocapError):
    """6D rotation parameters have (near-)parallel column vectors."""


class NoDecrease(MirrorMocapError):
    """Optimizer failed to reduce the loss in its opening iterations."""


class NaNDetected(MirrorMocapError):
    """Non-finite value encountered during optimization."""

    def __init__(self, message, frame_idx=None):
        super().__init__(message)
        self.frame_idx = frame_idx


# --- rendering --------------------------------------------------------------

class OutOfBounds(MirrorMocapError):
    """Pixel coordinate outside the image rectangle."""


class NoBoxIntersection(MirrorMocapError):
    """Ray misses the sampling box; the ray contributes nothing."""


class DimensionMismatch(MirrorMocapError):
    """Image/layer shapes disagree."""


# --- synthetic scenes -------------------------------------------------------

class PersonBehindMirror(MirrorMocapError):
    """Generated motion crosses to the far side of the mirror plane."""


# --- metrics ----------------------------------------------------------------

class DegenerateConfiguration(MirrorMocapError):
    """Joint set is collinear; Procrustes alignment is ill-posed."""


class ZeroPose(MirrorMocapError):
    """Prediction has zero norm after root-centering."""


# --- ingestion / pipeline ---------------------------------------------------

class ParseError(MirrorMocapError):
    """Keypoint file could not be parsed; message carries location context."""


class UnknownSchema(MirrorMocapError):
    """Requested joint schema is not registered."""
