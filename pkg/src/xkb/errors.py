"""Exception hierarchy shared across the package."""
from __future__ import annotations


class XkbError(Exception):
    """Base class for all library errors."""


class SchemaError(XkbError):
    """A schema violates its structural invariants."""


class ParseError(XkbError):
    """Syntax error in the rule DSL, with source position and expectations."""

    def __init__(self, message: str, line: int, column: int, expected: tuple[str, ...] = ()):
        loc = f"{line}:{column}: {message}"
        if expected:
            loc += " (expected " + " or ".join(expected) + ")"
        super().__init__(loc)
        self.line = line
        self.column = column
        self.expected = tuple(expected)


class ValidationError(XkbError):
    """Semantic rejection: unknown symbols, broken rule/KB invariants."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        if line is not None:
            super().__init__(f"{line}:{column}: {message}")
        else:
            super().__init__(message)
        self.line = line
        self.column = column


class GridTooLargeError(XkbError):
    """A full-universe extent would need more cells than the configured limit."""

    def __init__(self, features: tuple[str, ...], cells: int, limit: int):
        super().__init__(
            f"grid over features {', '.join(features)} has {cells} cells "
            f"(limit {limit})"
        )
        self.features = tuple(features)
        self.cells = cells
        self.limit = limit


class EnumerationCapError(XkbError):
    """An exact enumeration (remainders, vertex covers) exceeded its cap."""

    def __init__(self, what: str, cap: int, partial_count: int):
        super().__init__(f"{what} enumeration exceeded cap {cap} (found {partial_count} so far)")
        self.what = what
        self.cap = cap
        self.partial_count = partial_count


class ScenarioError(XkbError):
    """A scenario's configuration makes the requested revision impossible."""
