"""Exception types shared across the toolkit."""

from __future__ import annotations


class EvcError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(EvcError, ValueError):
    """An input value violates a documented contract."""


class ManifestError(ValidationError):
    """A manifest file is malformed or inconsistent."""


class QuotaError(ValidationError):
    """A split request asks for more utterances than a stratum holds."""


class TrainingDivergedError(EvcError, RuntimeError):
    """A training run produced a non-finite loss."""
