"""Exception and warning types shared across the package."""


class TransradError(Exception):
    """Base class for all package errors."""


class ChannelClosed(TransradError):
    """The photon energy is too large for the given incident momentum."""


class ChannelClosedOnSupport(TransradError):
    """A non-negligible fraction of the packet mass cannot emit the photon."""


class RegimeViolation(TransradError):
    """An approximation was requested outside its domain of validity."""


class RegimeWarning(UserWarning):
    """Warning-grade regime violation attached to closed forms and reports."""


class AccuracyWarning(UserWarning):
    """The adaptive quadrature did not reach the requested tolerance."""


class UnknownForm(TransradError, KeyError):
    """Requested closed form is not implemented."""


class OverlapViolation(TransradError):
    """Packets in a bunch overlap too much to be treated as distinguishable."""


class PacketConfigError(TransradError, ValueError):
    """A wave packet definition is unphysical or outside the supported class."""


class ConfigError(TransradError):
    """Invalid run configuration file."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
