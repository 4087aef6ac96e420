"""Exception types shared across the package."""

from __future__ import annotations


class AspectMinerError(Exception):
    """Base class for all package-specific errors."""


class DatasetLoadError(AspectMinerError):
    """Dataset file missing or unreadable."""


class DatasetFormatError(AspectMinerError):
    """Dataset file parsed but violated the expected layout."""


class TrainingError(AspectMinerError):
    """Training could not start or did not finish (bad view, divergence)."""


class EncoderLoadError(AspectMinerError):
    """Encoder checkpoint or vocabulary asset could not be resolved."""


class ConfigurationError(AspectMinerError):
    """Mismatch between a declared spec and actual weights/metadata."""


class PoolingError(AspectMinerError):
    """Pooling requested over a sequence with no real tokens."""


class ModelStoreError(AspectMinerError):
    """Serialized model directory is missing pieces or fails hash checks."""
