"""Exception types shared across the package."""


class RscamError(Exception):
    """Base class for all rscam-specific failures."""


class NoScanTime(RscamError):
    """No scan time inside the frame window: the point is not imaged this frame."""


class NegativeDepth(RscamError):
    """The point lies at or behind the camera plane during the frame."""


class Singularity(RscamError):
    """A projection denominator vanished (point moving with the scanline)."""


class DegenerateSlits(RscamError):
    """Slit geometry is undefined because the camera is not translating."""


class NoPeak(RscamError):
    """The marginalized spectrum has no peak above the noise floor."""


class ConfigError(RscamError):
    """A configuration is invalid or produces an under-constrained problem."""
