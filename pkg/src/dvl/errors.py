"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class DvlError(Exception):
    """Base class for every error raised by dvl."""


class LoadError(DvlError):
    """Input data or a manifest could not be loaded."""


class SchemaError(DvlError):
    """A reference to a table, attribute or constraint does not resolve."""


class KeyViolation(DvlError):
    """A declared key does not hold on the instance."""


class ForeignKeyViolation(DvlError):
    """A foreign key does not hold on the instance."""


class ExprError(DvlError):
    """An expression failed to parse, type-check or evaluate."""


class PlanError(DvlError):
    """A transform plan is malformed."""


class SpecError(DvlError):
    """A plot specification failed structural validation.

    ``pointer`` is a JSON pointer to the offending location.
    """

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer
        self.detail = message


class RefError(DvlError):
    """A foreign reference is unresolvable or ambiguous."""


class DanglingReference(RefError):
    """A lookup found no matching row; an upstream foreign key is violated."""


class AmbiguousReference(RefError):
    """A non-aggregating lookup matched more than one row."""


class LayoutError(DvlError):
    """A layout precondition failed."""


class CompileError(DvlError):
    """The spec could not be compiled into a task graph."""

    def __init__(self, message: str, cycle: list[str] | None = None):
        super().__init__(message)
        self.cycle = cycle or []


class ExecutionError(DvlError):
    """A task failed while executing a compiled graph."""


class HiveSyntaxError(DvlError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


class ScaleError(DvlError):
    """A scale was trained on mixed types or applied outside its domain."""
