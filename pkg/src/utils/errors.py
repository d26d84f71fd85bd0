"""
Exception and warning hierarchy shared by every module.

The CLI maps exceptions onto exit codes:
- ConfigError -> 2
- NonConvergenceError -> 3
"""

from __future__ import annotations


class ToolkitError(Exception):
    """Base class for all toolkit failures."""

    exit_code = 1


class ConfigError(ToolkitError):
    """Run file or override that cannot be turned into a valid RunConfig."""

    exit_code = 2

    def __init__(self, message: str, key: str | None = None, line: int | None = None) -> None:
        self.message = message
        self.key = key
        self.line = line
        where = []
        if key:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class NonConvergenceError(ToolkitError):
    """Adaptive quadrature exhausted its node budget."""

    exit_code = 3


class ParameterError(ToolkitError, ValueError):
    """Argument outside the domain of an operation."""


class IllPosedError(ToolkitError, ValueError):
    """Unregularized solve requested on a rank-deficient system."""


class ToolkitWarning(UserWarning):
    pass


class ConvergenceWarning(ToolkitWarning):
    pass


class TruncationWarning(ToolkitWarning):
    pass


class AliasingWarning(ToolkitWarning):
    pass


class RankWarning(ToolkitWarning):
    pass


class ConsistencyWarning(ToolkitWarning):
    pass
