"""Exception hierarchy shared by every stage of the pipeline."""


class ActivePolyError(Exception):
    """Base class for all errors raised by :mod:`activepoly`."""


class ValidationError(ActivePolyError, ValueError):
    """Input violates a documented invariant or precondition."""


class IngestionError(ActivePolyError, OSError):
    """A frame or metadata file could not be read or written."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path


class SingularSystemError(ActivePolyError, ValueError):
    """Least-squares system is rank deficient and unregularized."""


class GeometryError(ActivePolyError, ValueError):
    """Curves or points form a degenerate or crossing configuration."""


class AlignmentError(GeometryError):
    """A contour does not pass close enough to a required landmark."""


class DivergenceError(ActivePolyError, FloatingPointError):
    """Level-set evolution produced non-finite values."""

    def __init__(self, iteration):
        super().__init__(f"level set diverged at iteration {iteration}")
        self.iteration = iteration


class ConfigError(ActivePolyError, ValueError):
    """Configuration is inconsistent or produces impossible geometry."""


class UnprocessableFrameError(ActivePolyError):
    """A frame could not be carried through one of the per-frame stages."""

    def __init__(self, frame_index, stage, reason):
        super().__init__(f"frame {frame_index}: {stage} stage failed: {reason}")
        self.frame_index = frame_index
        self.stage = stage
        self.reason = str(reason)
