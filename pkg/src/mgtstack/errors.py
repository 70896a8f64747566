"""Exception taxonomy shared across the package.

Every error raised by library code derives from :class:`MgtStackError` so
callers (notably the CLI) can map failures onto exit codes without chasing
individual modules.
"""

from __future__ import annotations


class MgtStackError(Exception):
    """Base class for all package-specific errors."""


class InvalidConfig(MgtStackError):
    """A parameter or configuration value is outside its documented domain."""


class EmptyDocument(MgtStackError):
    """Text contains no sentences (empty or whitespace-only)."""


class EmptyRetention(MgtStackError):
    """A retention mask would keep nothing; reconstruction is undefined."""


class NumericalError(MgtStackError):
    """A gradient, likelihood, or score became non-finite."""


class DegenerateDataset(MgtStackError):
    """A labeled dataset does not contain both classes."""


class ModelFormatError(MgtStackError):
    """A model file is truncated, corrupt, or has an unsupported version."""


class AdapterProtocolError(MgtStackError):
    """An external detector child process violated the line protocol."""


class UnsupportedCombination(MgtStackError):
    """A world/sampler/scorer combination is intentionally not provided."""


class InvalidFilterSpec(MgtStackError):
    """A filter proportion requests more removals than a text can supply."""
