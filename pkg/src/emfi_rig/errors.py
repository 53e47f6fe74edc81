"""Exception taxonomy shared by all rig modules."""


class RigError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(RigError):
    """A value or configuration violates its documented constraints."""


class RangeError(ValidationError):
    """A numeric setting is outside the device's accepted range."""


class LimitError(RigError):
    """A motion target lies outside the stage soft limits."""


class StateError(RigError):
    """An operation was attempted from a state that does not permit it."""


class SafetyError(RigError):
    """The interlock forbids this operation right now."""


class ParseError(RigError):
    """A wire-protocol line could not be parsed."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class DeviceError(RigError):
    """A device transport failed (I/O error, unexpected response)."""


class DeviceTimeout(DeviceError):
    """A device did not answer within its timeout."""


class UndefinedRateError(RigError):
    """A rate was requested for zero attempts."""


class NotFoundError(RigError):
    """A referenced resource (campaign, calibration) does not exist."""


class BusyError(RigError):
    """The rig is owned by a running campaign."""
