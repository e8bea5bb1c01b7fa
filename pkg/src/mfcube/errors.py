"""Exception types shared by every module.

All of them derive from ``MFError`` so the CLI can map any library failure to
the input-error exit code with a single ``except`` clause.
"""


class MFError(Exception):
    """Base class for library errors."""


class InputError(MFError):
    """Malformed file or argument."""


class DanglingReference(InputError):
    pass


class DuplicateCell(InputError):
    pass


class DimensionError(InputError):
    pass


class MalformedMap(InputError):
    pass


class PreconditionError(MFError):
    """An operation was called outside its documented domain."""


class NotCat0Error(PreconditionError):
    pass


class NotConvexError(PreconditionError):
    pass


class VertexError(PreconditionError):
    pass


class CellBudgetExceeded(MFError):
    pass


class DeckError(MFError):
    """Seed map does not extend to a deck transformation."""


class QuasilineError(MFError):
    pass


class WindowTooSmall(MFError):
    pass


class OverflowBudget(MFError):
    pass


class AttachmentError(InputError):
    """An attaching map is not a local isometry."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness
