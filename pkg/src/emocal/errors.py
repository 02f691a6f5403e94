"""Shared exception types carrying stable, machine-readable error codes."""

from __future__ import annotations


class EmocalError(Exception):
    """Base class for domain errors.

    `code` is a short stable identifier meant for programmatic handling
    (CLI structured errors, foreign-language bindings); the message is for
    humans.
    """

    code = "error"

    def __init__(self, message: str, *, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class FormatViolationError(EmocalError):
    """Strict-mode transcript parse failure; carries the violation codes."""

    code = "format_violations"

    def __init__(self, violations: list[str]):
        super().__init__("transcript format violations: " + ", ".join(violations))
        self.violations = list(violations)
