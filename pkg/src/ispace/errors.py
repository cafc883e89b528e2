"""Exception hierarchy.

Every error carries a machine-readable ``code`` and, where it makes sense, a
``path`` locating the offending element (``"interactions.i.patient"``).
"""

from __future__ import annotations


class ISpaceError(Exception):
    code = "error"

    def __init__(self, message: str, *, path: str | None = None, code: str | None = None):
        super().__init__(message)
        self.message = message
        self.path = path
        if code is not None:
            self.code = code

    def __str__(self) -> str:
        if self.path:
            return f"{self.message} (at {self.path})"
        return self.message


class ValidationError(ISpaceError):
    """A model declaration violates a structural invariant."""

    code = "validation"


class UnknownEntity(ValidationError):
    code = "unknown-entity"


class UnknownInteraction(ValidationError):
    code = "unknown-interaction"


class UnknownType(ValidationError):
    code = "unknown-type"


class BadTimeInterval(ValidationError):
    code = "bad-time-interval"


class ActivationOutOfRange(ValidationError):
    code = "activation-out-of-range"


class MissingInitialState(ValidationError):
    code = "missing-initial-state"


class GoodsMismatch(ValidationError):
    code = "goods-mismatch"


class ZeroResourceViolation(ValidationError):
    code = "zero-resource-violation"


class EmptyZeroSet(ValidationError):
    code = "empty-zero-set"


class StartArrivalViolation(ValidationError):
    code = "start-arrival-violation"


class NotSimultaneous(ValidationError):
    code = "not-simultaneous"


class EmptyParts(ValidationError):
    code = "empty-parts"


# event sets

class EventSetError(ValidationError):
    code = "event-set"


class Overlap(EventSetError):
    code = "overlap"


class DegenerateInterval(EventSetError):
    code = "degenerate-interval"


class OutOfRange(EventSetError):
    code = "out-of-range"


# runtime

class BadDistribution(ISpaceError):
    code = "bad-distribution"


class NoGoodsComponent(ISpaceError):
    code = "no-goods-component"


class UndefinedAt(ISpaceError):
    code = "undefined-at"


class TransitionFailure(ISpaceError):
    code = "transition-failure"


class SerializationError(ISpaceError):
    code = "serialization"


# model files

class ParseError(ValidationError):
    code = "parse"

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None,
                 column: int | None = None, code: str | None = None):
        super().__init__(message, path=path, code=code)
        self.line = line
        self.column = column

    def __str__(self) -> str:
        loc = []
        if self.line is not None:
            loc.append(f"line {self.line}, column {self.column}")
        if self.path:
            loc.append(self.path)
        return f"{self.message} ({'; '.join(loc)})" if loc else self.message


class ModelSyntaxError(ParseError):
    code = "syntax"


class SchemaError(ParseError):
    code = "schema"
