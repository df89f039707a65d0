"""In-memory model for SDF schema documents.

The model mirrors the on-disk JSON: every known key maps to a typed field,
and a field set to ``None`` (or an empty list) means the key was absent in
the source. Keys we do not know about are kept verbatim in each object's
``extra`` dict so documents round-trip losslessly. Instances are treated as
immutable values after parse; the edit engine copies before mutating.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator, Optional

# Gate kinds, serialized lowercase in the `children_gate` key.
GATE_OR = "or"
GATE_XOR = "xor"
GATE_KINDS = (GATE_OR, GATE_XOR)

# The `comment` value that marks an event node as a logic gate.
GATE_COMMENT = "container node"

# Provenance tags for schema elements.
PROVENANCE_INDUCED = "induced"
PROVENANCE_CURATED = "curated"


@dataclass
class WdGrounding:
    """WikiData grounding triple (Qnode, label, description).

    Fields are individually optional so partially-grounded elements survive a
    round trip; validation flags partial groundings as warnings.
    """

    wd_node: Optional[str] = None
    wd_label: Optional[str] = None
    wd_description: Optional[str] = None

    @property
    def complete(self) -> bool:
        return (
            self.wd_node is not None
            and self.wd_label is not None
            and self.wd_description is not None
        )

    @property
    def empty(self) -> bool:
        return self.wd_node is None and self.wd_label is None and self.wd_description is None


@dataclass
class ParticipantRecord:
    """Role-labeled reference from an event to an entity."""

    id: str
    role_name: str
    entity: str
    extra: dict[str, Any] = field(default_factory=dict)


@dataclass
class EntityRecord:
    """An actor declared under an event, referenceable document-wide."""

    id: str
    name: str
    grounding: Optional[WdGrounding] = None
    extra: dict[str, Any] = field(default_factory=dict)


@dataclass
class RelationRecord:
    """Directed, named entity-entity link (subject -> object)."""

    id: str
    name: str
    subject: str
    object: str
    grounding: Optional[WdGrounding] = None
    extra: dict[str, Any] = field(default_factory=dict)


@dataclass
class EventNode:
    """A chapter or primitive event; logic gates are a marked variant.

    ``is_schema``, ``repeatable`` and ``optional_flag`` are tri-state: ``None``
    means the key was absent, which validation treats the same as ``False``.
    """

    id: str
    name: str
    description: Optional[str] = None
    grounding: Optional[WdGrounding] = None
    is_schema: Optional[bool] = None
    repeatable: Optional[bool] = None
    optional_flag: Optional[bool] = None
    children_gate: Optional[str] = None
    outlinks: list[str] = field(default_factory=list)
    participants: list[ParticipantRecord] = field(default_factory=list)
    children: list[str] = field(default_factory=list)
    entities: list[EntityRecord] = field(default_factory=list)
    relations: list[RelationRecord] = field(default_factory=list)
    gate_comment: Optional[str] = None
    importance: Any = None
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def is_gate(self) -> bool:
        return self.gate_comment == GATE_COMMENT

    @property
    def is_chapter(self) -> bool:
        """Chapter events carry children (or declare themselves with isSchema)."""
        return not self.is_gate and (bool(self.is_schema) or bool(self.children))

    @property
    def is_primitive(self) -> bool:
        return not self.is_gate and not self.is_chapter


@dataclass
class SchemaDocument:
    """Root SDF object: identity, versioning, and the flat event array.

    All events live in ``events``; hierarchy is encoded by each event's
    ``children`` id list. ``provenance_index`` maps element ids to
    ``"induced"`` / ``"curated"`` (serialized under the extension key
    ``provenance``).
    """

    id: str
    sdf_version: str
    doc_version: str
    events: list[EventNode] = field(default_factory=list)
    provenance_index: dict[str, str] = field(default_factory=dict)
    extra: dict[str, Any] = field(default_factory=dict)

    def event_ids(self) -> list[str]:
        return [ev.id for ev in self.events]

    def get_event(self, event_id: str) -> Optional[EventNode]:
        for ev in self.events:
            if ev.id == event_id:
                return ev
        return None

    def iter_entities(self) -> Iterator[tuple[EventNode, EntityRecord]]:
        """Yield (declaring event, entity) in document order."""
        for ev in self.events:
            for ent in ev.entities:
                yield ev, ent

    def get_entity(self, entity_id: str) -> Optional[EntityRecord]:
        for _, ent in self.iter_entities():
            if ent.id == entity_id:
                return ent
        return None

    def iter_participants(self) -> Iterator[tuple[EventNode, ParticipantRecord]]:
        for ev in self.events:
            for part in ev.participants:
                yield ev, part

    def iter_relations(self) -> Iterator[tuple[EventNode, RelationRecord]]:
        for ev in self.events:
            for rel in ev.relations:
                yield ev, rel

    def all_ids(self) -> list[str]:
        """Every @id in the document, in declaration order."""
        ids = []
        for ev in self.events:
            ids.append(ev.id)
            for part in ev.participants:
                ids.append(part.id)
            for ent in ev.entities:
                ids.append(ent.id)
            for rel in ev.relations:
                ids.append(rel.id)
        return ids

    def parent_of(self, event_id: str) -> Optional[str]:
        """Id of the first event listing ``event_id`` as a child, if any."""
        for ev in self.events:
            if event_id in ev.children:
                return ev.id
        return None

    def root_ids(self) -> list[str]:
        """Events not referenced as anyone's child, in array order."""
        child_ids = {cid for ev in self.events for cid in ev.children}
        return [ev.id for ev in self.events if ev.id not in child_ids]
