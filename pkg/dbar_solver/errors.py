"""Exception hierarchy shared by every stage of the solver."""
from typing import Optional


class DbarError(Exception):
    """Base class. `reference` names the violated bound or hypothesis."""

    def __init__(self, message: str, *, reference: Optional[str] = None, part: Optional[int] = None):
        super().__init__(message)
        self.reference = reference
        self.part = part

    def __str__(self) -> str:
        msg = super().__str__()
        if self.part is not None:
            msg = f"part {self.part}: {msg}"
        if self.reference:
            msg = f"{msg} [{self.reference}]"
        return msg


class DiskDomainError(DbarError, ValueError):
    """A point or a support is not strictly inside the unit disk."""


class SequenceError(DbarError, ValueError):
    """Empty or repeated sequence, or a chain point nobody covers."""


class PreconditionError(DbarError):
    """A construction was asked to run outside its hypotheses."""


class ConvergenceError(DbarError):
    """Newton, bisection, Neumann series or a Laurent tail did not settle."""


class CertificateError(DbarError):
    """A computed identity or certificate failed its check."""


class InputFormatError(DbarError, ValueError):
    """A file or config could not be read; message says where."""


def with_part(exc: DbarError, part: int) -> DbarError:
    """Tag an error with the index of the part that raised it (the first tag sticks)."""
    if exc.part is None:
        exc.part = part
    return exc
