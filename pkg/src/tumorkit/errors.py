"""Exception types shared across the toolkit."""


class TumorkitError(Exception):
    """Base class for all toolkit errors."""


class ManifestError(TumorkitError, ValueError):
    """Malformed or inconsistent dataset manifest."""


class ImageFormatError(TumorkitError, ValueError):
    """Image or mask file could not be decoded as 8-bit grayscale."""


class ShapeError(TumorkitError, ValueError):
    """Dimension or shape mismatch between related arrays."""


class ConfigError(TumorkitError, ValueError):
    """Invalid configuration value or unknown configuration key."""
