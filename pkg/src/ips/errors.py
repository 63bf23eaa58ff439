"""Exception hierarchy shared across the positioning stack."""


class IpsError(Exception):
    """Base class for all domain errors."""


# -- sample validation / serialization -------------------------------------

class OutOfRangeRssi(IpsError):
    pass


class OutOfBoundsPosition(IpsError):
    pass


class EmptyReadings(IpsError):
    pass


class MalformedBssid(IpsError):
    pass


class MalformedRecord(IpsError):
    def __init__(self, line: int, detail: str):
        super().__init__(f"line {line}: {detail}")
        self.line = line
        self.detail = detail


class InvalidArea(IpsError):
    pass


# -- radio map fitting ------------------------------------------------------

class UnknownReferencePoint(IpsError):
    pass


class EmptyInput(IpsError):
    pass


class SingularKernel(IpsError):
    pass


class DuplicateInput(IpsError):
    pass


class InsufficientData(IpsError):
    pass


class EmptySparseMap(IpsError):
    pass


# -- localization -----------------------------------------------------------

class InsufficientOverlap(IpsError):
    pass


class EmptyRadioMap(IpsError):
    pass


# -- simulator --------------------------------------------------------------

class OutOfBounds(IpsError):
    pass


class DegeneratePath(IpsError):
    pass


# -- service ----------------------------------------------------------------

class SessionNotFound(IpsError):
    pass


class WrongState(IpsError):
    pass


class ValidationFailed(IpsError):
    pass


class NotTrained(IpsError):
    pass


class TrainingFailed(IpsError):
    pass
