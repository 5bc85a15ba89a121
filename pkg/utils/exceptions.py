class AVSMError(Exception):
    """Base class for every error raised by the enhancement pipeline."""


class ConfigError(AVSMError, ValueError):
    pass


class EmptyInput(AVSMError, ValueError):
    pass


class DomainError(AVSMError, ValueError):
    """A value lies outside the domain of the operation (negative magnitude, delta <= 0, ...)."""


class ShapeError(AVSMError, ValueError):
    pass


class LengthMismatch(ShapeError):
    pass


class ContractError(AVSMError):
    """The caller broke an API contract (e.g. backward on a non-scalar)."""


class ResampleRequired(AVSMError):
    pass


class FileError(AVSMError, OSError):
    pass


class ZeroPowerSource(DomainError):
    pass


class ZeroReference(DomainError):
    pass


class VersionMismatch(AVSMError):
    pass


class CorruptFile(AVSMError):
    pass


class TooShort(AVSMError, ValueError):
    pass
