"""Exception types shared across the package."""


class MMBalError(Exception):
    """Base class for all package errors."""


class ConfigError(MMBalError, ValueError):
    """Inconsistent shapes, dimensions or configuration values."""


class InputError(MMBalError, ValueError):
    """Invalid data passed to an operation (empty, out of range, non-finite)."""


class ParseError(MMBalError, ValueError):
    """Malformed file contents. Carries the location of the offending token."""

    def __init__(self, message, path=None, line=None, column=None):
        self.path = path
        self.line = line
        self.column = column
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
