"""Exception types shared across the package."""


class PupilKitError(Exception):
    """Base class for all pupilkit errors."""


class ConfigError(PupilKitError):
    """Invalid detection parameters or pipeline configuration."""


class InputError(PupilKitError):
    """Malformed in-memory input: bad image shape, out-of-bounds ROI, empty contour."""


class FormatError(PupilKitError):
    """A file on disk does not match its expected layout or syntax."""


class FitDegenerateError(PupilKitError):
    """Ellipse fit is underdetermined or the fitted conic is not a real ellipse."""
