"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes, so raise the narrowest one that fits.
"""
from __future__ import annotations


class FracpError(Exception):
    """Base class for package errors."""


class ValidationError(FracpError, ValueError):
    """Bad parameters or configuration, detected before any compute."""


class SingularityError(FracpError, ValueError):
    """A kernel was evaluated on the diagonal x == y."""


class PreconditionError(FracpError, ValueError):
    """An inequality report was asked for outside its hypotheses.

    ``node`` holds the flat lattice index of the offending node when there
    is one, so callers can point at it.
    """

    def __init__(self, message: str, node: int | None = None):
        super().__init__(message)
        self.node = node
