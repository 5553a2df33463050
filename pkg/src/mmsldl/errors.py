"""Exception hierarchy shared by every module."""


class MMSLDLError(Exception):
    """Base class for all package errors."""


class InvalidInputError(MMSLDLError, ValueError):
    pass


class InvalidParameterError(MMSLDLError, ValueError):
    pass


class InvalidConfigurationError(MMSLDLError, ValueError):
    pass


class InvalidStateError(MMSLDLError, RuntimeError):
    pass


class NumericalFailureError(MMSLDLError, RuntimeError):
    """Raised when an iterate goes non-finite or a factorization fails.

    ``diagnostics`` carries whatever the failing routine could collect
    (residual history, iteration counter, modality/stage tags).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class DatasetError(MMSLDLError):
    pass


class ArchiveError(MMSLDLError):
    pass


class ChecksumError(ArchiveError):
    pass


class VersionError(ArchiveError):
    pass


class TruncatedBlobError(ArchiveError):
    pass
