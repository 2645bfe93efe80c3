"""Exception types shared across the package."""


class ClickAdaptError(Exception):
    """Base class for all package-specific errors."""


class ShapeMismatch(ClickAdaptError):
    """Raster shapes that were required to match do not."""


class LabelOutOfRange(ClickAdaptError):
    """A mask contains a class id outside {0..K-1}."""


class OutOfBounds(ClickAdaptError):
    """A click coordinate lies outside the raster extent."""


class EmptyClickSet(ClickAdaptError):
    """An operation requiring at least one click received none."""


class NoActiveTerm(ClickAdaptError):
    """A compound loss was requested with every term toggled off."""


class NonFiniteGradient(ClickAdaptError):
    """A backward pass produced NaN/inf gradients; the step was aborted."""


class CorruptCheckpoint(ClickAdaptError):
    """A checkpoint blob is truncated, malformed, or from an incompatible model."""


class EmptyForeground(ClickAdaptError):
    """A ground-truth mask has no non-background pixel to place a click in."""


class NoError(ClickAdaptError):
    """Prediction and reference agree everywhere; no correction click exists."""


class MissingFinalMask(ClickAdaptError):
    """Post-interaction adaptation was requested before the session finished."""


class SessionNotFound(ClickAdaptError):
    """Unknown session id."""


class ConcurrentClick(ClickAdaptError):
    """A click for this session is still being processed."""


class NoModelLoaded(ClickAdaptError):
    """The service has no checkpoint loaded."""


class BadImage(ClickAdaptError):
    """An uploaded image could not be decoded or violates input invariants."""


class ConfigError(ClickAdaptError):
    """Invalid configuration file or command-line arguments."""
