"""Exception hierarchy shared by every module."""


class FileInsurerError(Exception):
    """Base class for all errors raised by this package."""


class ProtocolError(FileInsurerError):
    """A request or operation was rejected by the protocol rules."""


class InvalidParams(FileInsurerError):
    pass


class InvariantViolation(FileInsurerError):
    """The global validator found a broken state invariant."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations[:5]))


class NoSectors(ProtocolError):
    pass


class ValueNotMultiple(ProtocolError):
    pass


class FileTooLarge(ProtocolError):
    pass


class CollisionExhausted(ProtocolError):
    pass


class NotOwner(ProtocolError):
    pass


class BadState(ProtocolError):
    pass


class WrongSector(ProtocolError):
    pass


class InvalidProof(ProtocolError):
    pass


class BadCapacity(ProtocolError):
    pass


class InsufficientFunds(ProtocolError):
    pass


class InsufficientBalance(ProtocolError):
    pass


class TimeReversal(ProtocolError):
    pass


class UnknownFile(ProtocolError):
    pass


class UnknownAccount(ProtocolError):
    pass


class NoLiveReplica(ProtocolError):
    pass


class NotLarge(ProtocolError):
    pass


class TooLarge(FileInsurerError):
    pass


class EmptyFileSet(FileInsurerError):
    pass


class DomainError(FileInsurerError):
    pass


class NonIntegralCount(FileInsurerError):
    pass


class ParseError(FileInsurerError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class ValidationError(FileInsurerError):
    pass
