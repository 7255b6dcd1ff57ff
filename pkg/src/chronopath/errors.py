"""Exception types shared across the package."""


class ChronopathError(Exception):
    """Base class for all package errors."""


class ParseError(ChronopathError):
    """Malformed input row; carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TypeConflictError(ChronopathError):
    """An account was declared with two different node types."""


class UnknownAccountError(ChronopathError, KeyError):
    """A queried account does not exist in the graph."""

    def __init__(self, account: str):
        self.account = account
        super().__init__(f"unknown account: {account!r}")


class ConfigError(ChronopathError):
    """Invalid or inconsistent configuration."""
