"""Exception hierarchy. Every error carries a machine-readable reason code."""


class GroupCAError(Exception):
    exit_code = 1
    reason = "error"

    def __init__(self, message, reason=None):
        super().__init__(message)
        if reason is not None:
            self.reason = reason


class UsageError(GroupCAError):
    exit_code = 2
    reason = "usage"


class CapExceeded(GroupCAError):
    exit_code = 3
    reason = "cap-exceeded"


class PreconditionError(GroupCAError):
    exit_code = 4
    reason = "precondition"


class FamilyMismatch(PreconditionError):
    reason = "family-mismatch"


class HypothesisNotEstablished(PreconditionError):
    reason = "hypothesis-not-established"


class ParseError(GroupCAError):
    exit_code = 5
    reason = "parse"
