"""Exception hierarchy shared across the package.

The CLI maps these onto its exit codes: image I/O failures exit 2,
parameter violations exit 3, internal consistency violations exit 4.
"""


class PbpSegError(Exception):
    """Base class for all package errors."""


class ParameterError(PbpSegError, ValueError):
    """A user-supplied parameter is out of its documented range."""


class ConsistencyError(PbpSegError):
    """Inputs that should agree structurally do not (dimension or bounds)."""


class ImageLoadError(PbpSegError):
    """Base class for image ingestion failures."""


class UnreadableFileError(ImageLoadError, OSError):
    """The input file is missing, unreadable, or not a decodable image."""


class UnsupportedImageError(ImageLoadError):
    """The image decodes but is not 8-bit grayscale or RGB."""


class EmptyImageError(ImageLoadError):
    """The image has a zero dimension."""
