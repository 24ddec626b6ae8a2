"""Shared exception types."""


class ConfigError(Exception):
    """Bad experiment configuration (maps to exit code 2)."""


class NumericalFailure(Exception):
    """A numerical routine failed to converge (exit code 3).

    Carries the best partial estimate when one exists.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class CertificateFailure(Exception):
    """A quantitative-transversality certificate could not be established."""


class InsufficientResolution(Exception):
    """A grid was too coarse to trust the extracted topology."""
