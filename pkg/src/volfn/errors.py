"""Exception hierarchy shared by the library and the CLI.

Each error family carries the process exit code the CLI maps it to:
configuration/tuning problems exit 2, data problems exit 3, numeric
failures exit 4.
"""
from __future__ import annotations


class VolfnError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(VolfnError):
    """Invalid or mutually inconsistent configuration."""

    exit_code = 2


class TuningError(ConfigError):
    """A tuning-parameter constraint is violated.

    Messages name the violated inequality so the caller can see which
    bound failed.
    """


class DataError(VolfnError):
    """Malformed, degenerate, or too-short input data."""

    exit_code = 3


class NumericError(VolfnError):
    """A numeric procedure failed to produce a trustworthy result."""

    exit_code = 4


class DegeneracyError(NumericError):
    """An eigenvalue gap required for spectral differentiation is absent."""


class DomainError(NumericError):
    """A matrix argument lies outside a functional's domain."""
