"""Exception types shared across the package.

Every error carries a short machine-readable ``code`` (e.g. ``"ROW_COUNT"``)
so callers and the CLI can branch on the failure kind without parsing text.
"""

from __future__ import annotations


class EcgsrError(Exception):
    """Base class for all package errors."""

    def __init__(self, code: str, message: str = ""):
        self.code = code
        super().__init__(f"{code}: {message}" if message else code)


class RecordError(EcgsrError, ValueError):
    pass


class WfdbError(EcgsrError, ValueError):
    pass


class DatasetError(EcgsrError, ValueError):
    pass


class FilterError(EcgsrError, ValueError):
    pass


class SynthError(EcgsrError, ValueError):
    pass


class ShapeError(EcgsrError, ValueError):
    pass


class GraphError(EcgsrError, RuntimeError):
    pass


class ModelError(EcgsrError, ValueError):
    pass


class MetricError(EcgsrError, ValueError):
    pass


class ExperimentError(EcgsrError, ValueError):
    pass


class ConfigError(EcgsrError, ValueError):
    pass
