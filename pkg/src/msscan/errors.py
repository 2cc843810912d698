"""Exception hierarchy shared by all pipeline stages."""


class MsscanError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(MsscanError, ValueError):
    pass


class DegenerateIllumination(MsscanError):
    """Illumination times sensor response integrates to zero."""


class UnsupportedCapability(MsscanError):
    """The requested operation is not available on this driver variant."""


class NoIllumination(MsscanError):
    """A scan was requested while no LED is energized."""


class CubeFormatError(MsscanError):
    code = "format"


class BadMagic(CubeFormatError):
    code = "bad-magic"


class UnsupportedVersion(CubeFormatError):
    code = "bad-version"


class TruncatedPayload(CubeFormatError):
    code = "truncated"


class SizeMismatch(CubeFormatError):
    code = "size-mismatch"


class ImageFormatError(MsscanError):
    """Malformed PGM/PPM data."""


class InsufficientData(MsscanError):
    pass


class NoLatticeFound(MsscanError):
    """No periodic peak above the significance threshold."""
