"""Exception hierarchy for the audit toolkit."""

from __future__ import annotations


class ProxyAuditError(Exception):
    """Base class for all toolkit errors."""


class TypingError(ProxyAuditError):
    """An expression violates the typing rules of the model language."""


class PositionError(ProxyAuditError):
    """A node position does not exist in the expression it was applied to."""


class EvaluationError(ProxyAuditError):
    """Evaluation failed at a specific node (currently: division by zero)."""

    def __init__(self, message: str, position: tuple[int, ...], row: int | None = None):
        super().__init__(message)
        self.position = position
        self.row = row


class InputSchemaError(ProxyAuditError):
    """A row or table does not provide the features an expression reads."""


class ModelSchemaError(ProxyAuditError):
    """A serialized model does not conform to the exchange format."""


class DatasetError(ProxyAuditError):
    """A dataset file is malformed or inconsistent with the audit request."""


class ConfigError(ProxyAuditError):
    """An audit configuration is invalid."""


class PolicyError(ProxyAuditError):
    """A judgment policy file is malformed."""


class OracleUnavailable(ProxyAuditError):
    """The judgment source cannot answer right now; callers may suspend."""


class CheckpointError(ProxyAuditError):
    """A checkpoint file is malformed or inconsistent."""
