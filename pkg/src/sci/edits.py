"""Curation commands: validated, logged, replayable mutations of a document.

Every operation is a pure function ``(doc, ...) -> new doc`` that either fully
applies or raises :class:`EditError` without touching the input. A
:class:`DocumentSession` strings commands together, assigns monotonically
increasing sequence numbers, and supports undo/redo by replaying its log from
the initial document.

Command envelope (the wire format shared with the HTTP service):

    {"op": "<kind>", "args": {...}, "expect_version": "<doc version>"}

Kinds: AddEvent, AddParticipant, AddRelation, AddOutlink, AddXorGate,
AddEntity, LinkGateChild, UpdateEvent, RemoveElement, ReplaceDocument.
"""

from __future__ import annotations

import copy
import re
from dataclasses import dataclass, field
from typing import Any, Optional

from .sdf.io import SdfError, parse_object, parse_schema
from .sdf.model import (
    GATE_COMMENT,
    GATE_XOR,
    PROVENANCE_CURATED,
    EntityRecord,
    EventNode,
    ParticipantRecord,
    RelationRecord,
    SchemaDocument,
    WdGrounding,
)
from .sdf.validation import ValidationReport, has_cycle, validate


class EditError(Exception):
    """A rejected command. ``code`` is stable and machine-readable."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def bump_version(version: str) -> str:
    """Increment the trailing dotted revision counter, appending one if absent.

    "1" -> "1.1", "1.1" -> "1.2", "3.0.7" -> "3.0.8".
    """
    match = re.fullmatch(r"(.*)\.(\d+)", version)
    if match:
        return f"{match.group(1)}.{int(match.group(2)) + 1}"
    return f"{version}.1"


def _next_id(doc: SchemaDocument, category: str) -> str:
    """Deterministic id allocation: ``<doc-id>/<category>/<n>`` with n = max+1."""
    pattern = re.compile(rf"{re.escape(doc.id)}/{category}/(\d+)$")
    highest = 0
    for element_id in doc.all_ids():
        match = pattern.match(element_id)
        if match:
            highest = max(highest, int(match.group(1)))
    return f"{doc.id}/{category}/{highest + 1}"


def _get_event(doc: SchemaDocument, event_id: str, code: str = "EventNotFound") -> EventNode:
    ev = doc.get_event(event_id)
    if ev is None:
        raise EditError(code, f"event '{event_id}' does not exist")
    return ev


def _entity_exists(doc: SchemaDocument, entity_id: str, side: str = "entity") -> None:
    if doc.get_entity(entity_id) is None:
        raise EditError("EntityNotFound", f"{side} '{entity_id}' does not resolve to an entity")


def _grounding_from(value: Any) -> Optional[WdGrounding]:
    if value is None:
        return None
    if isinstance(value, WdGrounding):
        return None if value.empty else value
    if isinstance(value, dict):
        g = WdGrounding(
            wd_node=value.get("wd_node"),
            wd_label=value.get("wd_label"),
            wd_description=value.get("wd_description"),
        )
        return None if g.empty else g
    raise EditError("BadArgs", "grounding must be an object with wd_node/wd_label/wd_description")


def add_event(
    doc: SchemaDocument,
    parent: Optional[str],
    name: str,
    grounding: Any = None,
    description: str = "",
    is_chapter: bool = False,
) -> tuple[SchemaDocument, str]:
    """Create an event, appended under ``parent`` or as a new top-level node."""
    if not name:
        raise EditError("EmptyName", "event name is required")
    if parent is not None:
        parent_ev = _get_event(doc, parent, "ParentNotFound")
        if parent_ev.is_gate:
            raise EditError("ParentIsGate", f"'{parent}' is a logic gate; use LinkGateChild")
        if not parent_ev.is_chapter:
            raise EditError("ParentIsPrimitive", f"'{parent}' is a primitive event")
    doc = copy.deepcopy(doc)
    new_id = _next_id(doc, "Events")
    node = EventNode(
        id=new_id,
        name=name,
        description=description or None,
        grounding=_grounding_from(grounding),
        is_schema=True if is_chapter else None,
    )
    doc.events.append(node)
    if parent is not None:
        parent_ev = doc.get_event(parent)
        parent_ev.children.append(new_id)
        parent_ev.is_schema = True
    doc.provenance_index[new_id] = PROVENANCE_CURATED
    doc.doc_version = bump_version(doc.doc_version)
    return doc, new_id


def add_participant(
    doc: SchemaDocument,
    event: str,
    role_name: str,
    participant_name: str = "",
    entity: Any = None,
) -> tuple[SchemaDocument, str]:
    """Attach a role-labeled participant to a primitive event.

    ``entity`` is either an existing entity id or a new-entity spec
    (``{"name": ..., "grounding": {...}}``); a new entity is declared under
    the same event before being referenced.
    """
    if not role_name:
        raise EditError("EmptyRole", "participant role is required")
    ev = _get_event(doc, event)
    if ev.is_gate:
        raise EditError("EventIsGate", f"'{event}' is a logic gate")
    if ev.is_chapter:
        raise EditError("EventIsChapter", f"'{event}' is a chapter event; pick a primitive")
    new_entity_spec: Optional[dict] = None
    if isinstance(entity, dict):
        new_entity_spec = entity
        ent_name = new_entity_spec.get("name") or participant_name
        if not ent_name:
            raise EditError("EmptyName", "new entity requires a name")
    elif isinstance(entity, str):
        _entity_exists(doc, entity)
    else:
        raise EditError("BadArgs", "entity must be an id or a new-entity spec")

    doc = copy.deepcopy(doc)
    ev = doc.get_event(event)
    if new_entity_spec is not None:
        entity_id = _next_id(doc, "Entities")
        ev.entities.append(
            EntityRecord(
                id=entity_id,
                name=new_entity_spec.get("name") or participant_name,
                grounding=_grounding_from(new_entity_spec.get("grounding")),
            )
        )
        doc.provenance_index[entity_id] = PROVENANCE_CURATED
    else:
        entity_id = entity
    participant_id = _next_id(doc, "Participants")
    part = ParticipantRecord(id=participant_id, role_name=role_name, entity=entity_id)
    if participant_name:
        part.extra["name"] = participant_name
    ev.participants.append(part)
    doc.provenance_index[participant_id] = PROVENANCE_CURATED
    doc.doc_version = bump_version(doc.doc_version)
    return doc, participant_id


def add_relation(
    doc: SchemaDocument,
    subject: str,
    name: str,
    object: str,
    grounding: Any = None,
) -> tuple[SchemaDocument, str]:
    """Create a directed entity-entity relation, stored under the event that
    declares the subject entity."""
    if not name:
        raise EditError("EmptyName", "relation name is required")
    _entity_exists(doc, subject, "relation subject")
    _entity_exists(doc, object, "relation object")
    doc = copy.deepcopy(doc)
    host = next(ev for ev, ent in doc.iter_entities() if ent.id == subject)
    relation_id = _next_id(doc, "Relations")
    host.relations.append(
        RelationRecord(
            id=relation_id,
            name=name,
            subject=subject,
            object=object,
            grounding=_grounding_from(grounding),
        )
    )
    doc.provenance_index[relation_id] = PROVENANCE_CURATED
    doc.doc_version = bump_version(doc.doc_version)
    return doc, relation_id


def _node_kind(ev: EventNode) -> str:
    if ev.is_gate:
        return "gate"
    return "chapter" if ev.is_chapter else "primitive"


def add_outlink(
    doc: SchemaDocument, source: str, target: str, strict: bool = False
) -> SchemaDocument:
    """Add a temporal edge between two same-kind sibling events.

    Cross-parent links are allowed unless ``strict`` (they surface as
    warnings in validation either way).
    """
    src = _get_event(doc, source)
    tgt = _get_event(doc, target)
    if _node_kind(src) != _node_kind(tgt):
        raise EditError(
            "KindMismatch",
            f"outlink must join events of the same kind ({_node_kind(src)} vs {_node_kind(tgt)})",
        )
    if target in src.outlinks:
        raise EditError("DuplicateOutlink", f"outlink {source} -> {target} already exists")
    src_parent = doc.parent_of(source)
    tgt_parent = doc.parent_of(target)
    if src_parent != tgt_parent:
        if strict:
            raise EditError("CrossParent", "outlink would cross parent boundaries")
    else:
        # Same sibling group: the new edge must keep its outlink graph acyclic.
        if src_parent is None:
            group = doc.root_ids()
        else:
            group = [cid for cid in doc.get_event(src_parent).children if doc.get_event(cid)]
        members = set(group)

        def succ(eid: str) -> list[str]:
            out = [t for t in doc.get_event(eid).outlinks if t in members]
            if eid == source and target in members:
                out.append(target)
            return out

        if has_cycle(group, succ):
            raise EditError(
                "WouldCreateTemporalCycle",
                f"outlink {source} -> {target} would close a temporal cycle",
            )
    doc = copy.deepcopy(doc)
    doc.get_event(source).outlinks.append(target)
    doc.doc_version = bump_version(doc.doc_version)
    return doc


def add_xor_gate(doc: SchemaDocument, parent: str, name: str) -> tuple[SchemaDocument, str]:
    """Create an empty XOR gate under a chapter event."""
    if not name:
        raise EditError("EmptyName", "gate name is required")
    parent_ev = _get_event(doc, parent, "ParentNotFound")
    if parent_ev.is_gate:
        raise EditError("ParentIsGate", f"'{parent}' is itself a gate")
    if not parent_ev.is_chapter:
        raise EditError("ParentIsPrimitive", f"'{parent}' is a primitive event")
    doc = copy.deepcopy(doc)
    gate_id = _next_id(doc, "Events")
    doc.events.append(
        EventNode(id=gate_id, name=name, children_gate=GATE_XOR, gate_comment=GATE_COMMENT)
    )
    doc.get_event(parent).children.append(gate_id)
    doc.provenance_index[gate_id] = PROVENANCE_CURATED
    doc.doc_version = bump_version(doc.doc_version)
    return doc, gate_id


def link_gate_child(doc: SchemaDocument, gate: str, event: str) -> SchemaDocument:
    """Move an event under a gate, detaching it from its previous parent."""
    gate_ev = _get_event(doc, gate, "GateNotFound")
    if not gate_ev.is_gate:
        raise EditError("NotAGate", f"'{gate}' is not a logic gate")
    moved = _get_event(doc, event)
    if moved.is_gate:
        raise EditError("EventIsGate", "gates cannot be nested under gates")
    if event == gate:
        raise EditError("WouldCreateHierarchyCycle", "cannot link a gate under itself")
    if event in gate_ev.children:
        raise EditError("AlreadyLinked", f"'{event}' is already under the gate")
    # The moved event must not be an ancestor of the gate.
    cursor = doc.parent_of(gate)
    while cursor is not None:
        if cursor == event:
            raise EditError(
                "WouldCreateHierarchyCycle", f"'{event}' is an ancestor of the gate"
            )
        cursor = doc.parent_of(cursor)
    # Joining the gate's sibling group must not close a temporal cycle there.
    new_group = [cid for cid in gate_ev.children if doc.get_event(cid)] + [event]
    members = set(new_group)

    def succ(eid: str) -> list[str]:
        return [t for t in doc.get_event(eid).outlinks if t in members]

    if has_cycle(new_group, succ):
        raise EditError(
            "WouldCreateTemporalCycle",
            f"moving '{event}' under the gate would close a temporal cycle",
        )
    doc = copy.deepcopy(doc)
    old_parent_id = doc.parent_of(event)
    if old_parent_id is not None:
        old_parent = doc.get_event(old_parent_id)
        # Keep the old parent's isSchema flag: an emptied chapter stays a
        # declared chapter (warning-level) instead of silently changing kind.
        old_parent.children = [cid for cid in old_parent.children if cid != event]
    gate_ev = doc.get_event(gate)
    gate_ev.children.append(event)
    gate_ev.is_schema = True
    doc.doc_version = bump_version(doc.doc_version)
    return doc


def add_entity(
    doc: SchemaDocument, scope_event: str, name: str, grounding: Any = None
) -> tuple[SchemaDocument, str]:
    """Declare a new entity under an event; it is referenceable document-wide."""
    if not name:
        raise EditError("EmptyName", "entity name is required")
    scope = _get_event(doc, scope_event)
    if scope.is_gate:
        raise EditError("EventIsGate", f"'{scope_event}' is a logic gate")
    doc = copy.deepcopy(doc)
    entity_id = _next_id(doc, "Entities")
    doc.get_event(scope_event).entities.append(
        EntityRecord(id=entity_id, name=name, grounding=_grounding_from(grounding))
    )
    doc.provenance_index[entity_id] = PROVENANCE_CURATED
    doc.doc_version = bump_version(doc.doc_version)
    return doc, entity_id


@dataclass
class EntityOverview:
    id: str
    name: str
    wd_label: Optional[str]
    participating_events: list[str]

    def to_jsonable(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "wd_label": self.wd_label,
            "participating_events": self.participating_events,
        }


def list_entities(doc: SchemaDocument) -> list[EntityOverview]:
    """All declared entities, in declaration order, with the events whose
    participants reference them."""
    out = []
    for _, ent in doc.iter_entities():
        participating: list[str] = []
        for ev, part in doc.iter_participants():
            if part.entity == ent.id and ev.id not in participating:
                participating.append(ev.id)
        out.append(
            EntityOverview(
                id=ent.id,
                name=ent.name,
                wd_label=ent.grounding.wd_label if ent.grounding else None,
                participating_events=participating,
            )
        )
    return out


UPDATABLE_FIELDS = ("name", "description", "grounding", "repeatable", "optional_flag", "importance")


def update_event(doc: SchemaDocument, event: str, patch: dict) -> SchemaDocument:
    """Apply a partial update to an event's editable fields."""
    if not isinstance(patch, dict) or not patch:
        raise EditError("EmptyPatch", "patch must contain at least one field")
    unknown = [k for k in patch if k not in UPDATABLE_FIELDS]
    if unknown:
        raise EditError("UnknownField", f"cannot patch: {', '.join(sorted(unknown))}")
    ev = _get_event(doc, event)
    if "name" in patch and not patch["name"]:
        raise EditError("EmptyName", "event name cannot be cleared")
    for key in ("name", "description"):
        if key in patch and patch[key] is not None and not isinstance(patch[key], str):
            raise EditError("BadArgs", f"{key} must be a string")
    for key in ("repeatable", "optional_flag"):
        if key in patch and patch[key] is not None and not isinstance(patch[key], bool):
            raise EditError("BadArgs", f"{key} must be a boolean")
    if ev.is_gate and patch.get("grounding") is not None:
        raise EditError("EventIsGate", "gates cannot carry grounding")
    doc = copy.deepcopy(doc)
    ev = doc.get_event(event)
    for key, value in patch.items():
        if key == "grounding":
            ev.grounding = _grounding_from(value)
        elif key == "description":
            ev.description = value if value else None
        else:
            setattr(ev, key, value)
    doc.doc_version = bump_version(doc.doc_version)
    return doc


def _collect_subtree(doc: SchemaDocument, root: str) -> list[str]:
    seen: list[str] = []
    stack = [root]
    while stack:
        eid = stack.pop()
        if eid in seen:
            continue
        seen.append(eid)
        ev = doc.get_event(eid)
        if ev is not None:
            stack.extend(reversed(ev.children))
    return seen


def remove_element(doc: SchemaDocument, element: str) -> SchemaDocument:
    """Delete an element with cascade: an event takes its subtree along, an
    entity takes referencing participants and relations along."""
    removed_ids: set[str] = set()
    target_event = doc.get_event(element)
    target_entity = doc.get_entity(element)
    is_participant = any(part.id == element for _, part in doc.iter_participants())
    is_relation = any(rel.id == element for _, rel in doc.iter_relations())
    if not (target_event or target_entity or is_participant or is_relation):
        raise EditError("ElementNotFound", f"no element with id '{element}'")

    doc = copy.deepcopy(doc)
    if target_event is not None:
        doomed = set(_collect_subtree(doc, element))
        removed_ids |= doomed
        for ev in doc.events:
            if ev.id in doomed:
                removed_ids |= {p.id for p in ev.participants}
                removed_ids |= {e.id for e in ev.entities}
                removed_ids |= {r.id for r in ev.relations}
        dead_entities = {
            ent.id for ev, ent in doc.iter_entities() if ev.id in doomed
        }
        doc.events = [ev for ev in doc.events if ev.id not in doomed]
        for ev in doc.events:
            # Parents keep their isSchema flag even when emptied: demoting the
            # kind here could turn surviving outlinks into hard violations.
            ev.children = [cid for cid in ev.children if cid not in doomed]
            ev.outlinks = [oid for oid in ev.outlinks if oid not in doomed]
            # Cascade: entities declared in the removed subtree are gone too.
            kept_parts = [p for p in ev.participants if p.entity not in dead_entities]
            removed_ids |= {p.id for p in ev.participants if p.entity in dead_entities}
            ev.participants = kept_parts
            kept_rels = [
                r
                for r in ev.relations
                if r.subject not in dead_entities and r.object not in dead_entities
            ]
            removed_ids |= {r.id for r in ev.relations} - {r.id for r in kept_rels}
            ev.relations = kept_rels
    elif target_entity is not None:
        removed_ids.add(element)
        for ev in doc.events:
            removed_ids |= {p.id for p in ev.participants if p.entity == element}
            ev.participants = [p for p in ev.participants if p.entity != element]
            removed_ids |= {
                r.id for r in ev.relations if r.subject == element or r.object == element
            }
            ev.relations = [
                r for r in ev.relations if r.subject != element and r.object != element
            ]
            ev.entities = [e for e in ev.entities if e.id != element]
    elif is_participant:
        removed_ids.add(element)
        for ev in doc.events:
            ev.participants = [p for p in ev.participants if p.id != element]
    else:
        removed_ids.add(element)
        for ev in doc.events:
            ev.relations = [r for r in ev.relations if r.id != element]

    for rid in removed_ids:
        doc.provenance_index.pop(rid, None)
    doc.doc_version = bump_version(doc.doc_version)
    return doc


def replace_document(
    doc: SchemaDocument, new_bytes: bytes | str
) -> tuple[SchemaDocument, ValidationReport]:
    """Wholesale replacement from raw JSON (the direct-editor path).

    Parse errors propagate and leave the previous document untouched. The
    pasted document keeps its own version string.
    """
    new_doc = parse_schema(new_bytes)
    return new_doc, validate(new_doc)


# --- command envelopes and sessions ---

OP_ADD_EVENT = "AddEvent"
OP_ADD_PARTICIPANT = "AddParticipant"
OP_ADD_RELATION = "AddRelation"
OP_ADD_OUTLINK = "AddOutlink"
OP_ADD_XOR_GATE = "AddXorGate"
OP_ADD_ENTITY = "AddEntity"
OP_LINK_GATE_CHILD = "LinkGateChild"
OP_UPDATE_EVENT = "UpdateEvent"
OP_REMOVE_ELEMENT = "RemoveElement"
OP_REPLACE_DOCUMENT = "ReplaceDocument"

ALL_OPS = (
    OP_ADD_EVENT,
    OP_ADD_PARTICIPANT,
    OP_ADD_RELATION,
    OP_ADD_OUTLINK,
    OP_ADD_XOR_GATE,
    OP_ADD_ENTITY,
    OP_LINK_GATE_CHILD,
    OP_UPDATE_EVENT,
    OP_REMOVE_ELEMENT,
    OP_REPLACE_DOCUMENT,
)


@dataclass
class EditCommand:
    op: str
    args: dict[str, Any]
    seq: int = 0

    def to_envelope(self, expect_version: Optional[str] = None) -> dict:
        env: dict[str, Any] = {"op": self.op, "args": self.args}
        if expect_version is not None:
            env["expect_version"] = expect_version
        return env


@dataclass
class ApplyResult:
    document: SchemaDocument
    doc_version: str
    created_ids: list[str] = field(default_factory=list)


def _arg(args: dict, key: str) -> Any:
    if key not in args:
        raise EditError("BadArgs", f"missing argument '{key}'")
    return args[key]


def apply_command(doc: SchemaDocument, op: str, args: dict) -> ApplyResult:
    """Dispatch one envelope onto a document. Pure; raises EditError."""
    if op == OP_ADD_EVENT:
        new_doc, new_id = add_event(
            doc,
            parent=args.get("parent"),
            name=_arg(args, "name"),
            grounding=args.get("grounding"),
            description=args.get("description", ""),
            is_chapter=bool(args.get("is_chapter", False)),
        )
        return ApplyResult(new_doc, new_doc.doc_version, [new_id])
    if op == OP_ADD_PARTICIPANT:
        new_doc, new_id = add_participant(
            doc,
            event=_arg(args, "event"),
            role_name=_arg(args, "role_name"),
            participant_name=args.get("participant_name", ""),
            entity=_arg(args, "entity"),
        )
        return ApplyResult(new_doc, new_doc.doc_version, [new_id])
    if op == OP_ADD_RELATION:
        new_doc, new_id = add_relation(
            doc,
            subject=_arg(args, "subject"),
            name=_arg(args, "name"),
            object=_arg(args, "object"),
            grounding=args.get("grounding"),
        )
        return ApplyResult(new_doc, new_doc.doc_version, [new_id])
    if op == OP_ADD_OUTLINK:
        new_doc = add_outlink(
            doc,
            source=_arg(args, "source"),
            target=_arg(args, "target"),
            strict=bool(args.get("strict", False)),
        )
        return ApplyResult(new_doc, new_doc.doc_version)
    if op == OP_ADD_XOR_GATE:
        new_doc, new_id = add_xor_gate(doc, parent=_arg(args, "parent"), name=_arg(args, "name"))
        return ApplyResult(new_doc, new_doc.doc_version, [new_id])
    if op == OP_ADD_ENTITY:
        new_doc, new_id = add_entity(
            doc,
            scope_event=_arg(args, "scope_event"),
            name=_arg(args, "name"),
            grounding=args.get("grounding"),
        )
        return ApplyResult(new_doc, new_doc.doc_version, [new_id])
    if op == OP_LINK_GATE_CHILD:
        new_doc = link_gate_child(doc, gate=_arg(args, "gate"), event=_arg(args, "event"))
        return ApplyResult(new_doc, new_doc.doc_version)
    if op == OP_UPDATE_EVENT:
        new_doc = update_event(doc, event=_arg(args, "event"), patch=_arg(args, "patch"))
        return ApplyResult(new_doc, new_doc.doc_version)
    if op == OP_REMOVE_ELEMENT:
        new_doc = remove_element(doc, element=_arg(args, "element"))
        return ApplyResult(new_doc, new_doc.doc_version)
    if op == OP_REPLACE_DOCUMENT:
        payload = _arg(args, "document")
        try:
            new_doc = parse_object(payload)
        except SdfError as exc:
            raise EditError("ParseError", str(exc)) from exc
        return ApplyResult(new_doc, new_doc.doc_version)
    raise EditError("UnknownOp", f"unknown command kind '{op}'")


class DocumentSession:
    """Single-writer editing session: a document plus its edit log.

    The session's current document always equals a replay of the log from the
    initial document; undo/redo move the boundary between log and redo stack.
    """

    def __init__(self, document: SchemaDocument):
        self.initial = document
        self.current = document
        self.log: list[EditCommand] = []
        self._redo: list[EditCommand] = []
        self._seq = 0

    @property
    def doc_version(self) -> str:
        return self.current.doc_version

    def apply(self, op: str, args: dict) -> ApplyResult:
        result = apply_command(self.current, op, args)
        self._seq += 1
        self.log.append(EditCommand(op=op, args=args, seq=self._seq))
        self._redo.clear()
        self.current = result.document
        return result

    def undo(self) -> SchemaDocument:
        if not self.log:
            raise EditError("NothingToUndo", "the edit log is empty")
        self._redo.append(self.log.pop())
        self.current = replay(self.initial, self.log)
        return self.current

    def redo(self) -> SchemaDocument:
        if not self._redo:
            raise EditError("NothingToRedo", "nothing to redo")
        command = self._redo.pop()
        result = apply_command(self.current, command.op, command.args)
        self.log.append(command)
        self.current = result.document
        return self.current


def replay(initial: SchemaDocument, commands: list[EditCommand]) -> SchemaDocument:
    """Re-run a command log from the initial document."""
    doc = initial
    for command in commands:
        doc = apply_command(doc, command.op, command.args).document
    return doc
