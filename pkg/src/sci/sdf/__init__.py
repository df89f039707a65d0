"""Schema Data Format: document model, parsing, serialization, validation."""

from .model import (
    GATE_COMMENT,
    GATE_KINDS,
    GATE_OR,
    GATE_XOR,
    PROVENANCE_CURATED,
    PROVENANCE_INDUCED,
    EntityRecord,
    EventNode,
    ParticipantRecord,
    RelationRecord,
    SchemaDocument,
    WdGrounding,
)
from .io import (
    DuplicateId,
    MalformedJson,
    MissingRequiredKey,
    SdfError,
    WrongType,
    document_to_object,
    parse_object,
    parse_schema,
    serialize_schema,
)
from .validation import (
    NotAChapterError,
    TemporalCycleError,
    ValidationReport,
    Violation,
    temporal_order,
    validate,
)

__all__ = [
    "GATE_COMMENT",
    "GATE_KINDS",
    "GATE_OR",
    "GATE_XOR",
    "PROVENANCE_CURATED",
    "PROVENANCE_INDUCED",
    "EntityRecord",
    "EventNode",
    "ParticipantRecord",
    "RelationRecord",
    "SchemaDocument",
    "WdGrounding",
    "DuplicateId",
    "MalformedJson",
    "MissingRequiredKey",
    "SdfError",
    "WrongType",
    "document_to_object",
    "parse_object",
    "parse_schema",
    "serialize_schema",
    "NotAChapterError",
    "TemporalCycleError",
    "ValidationReport",
    "Violation",
    "temporal_order",
    "validate",
]
