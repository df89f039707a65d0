"""Parsing and canonical serialization of SDF documents.

Parsing maps JSON keys onto the model one-for-one (`@id`, `sdfVersion`,
`version`, `events`, `isSchema`, `children_gate`, `outlinks`, `participants`,
`children`, `entities`, `relations`, `roleName`, `relationSubject`,
`relationObject`, `wd_node`, `wd_label`, `wd_description`, `repeatable`,
`optional`, `comment`, `importance`) and stashes anything else in the
object's ``extra`` sidecar. Cross-reference checking is deliberately not done
here; see :mod:`sci.sdf.validation`.

Serialization emits a canonical rendering: fixed key order per object kind,
two-space indentation, UTF-8, trailing newline. Absent optional keys stay
absent and empty element lists are dropped (the document-level ``events``
array is always written). ``parse_schema(serialize_schema(doc))`` equals
``doc`` structurally, unknown keys included.
"""

from __future__ import annotations

import json
from typing import Any, Optional

from .model import (
    EntityRecord,
    EventNode,
    ParticipantRecord,
    RelationRecord,
    SchemaDocument,
    WdGrounding,
)


class SdfError(Exception):
    """Base class for SDF parse errors."""


class MalformedJson(SdfError):
    pass


class MissingRequiredKey(SdfError):
    def __init__(self, path: str):
        super().__init__(f"missing required key at {path}")
        self.path = path


class WrongType(SdfError):
    def __init__(self, path: str, expected: str):
        super().__init__(f"wrong type at {path}: expected {expected}")
        self.path = path
        self.expected = expected


class DuplicateId(SdfError):
    def __init__(self, element_id: str):
        super().__init__(f"duplicate @id: {element_id}")
        self.element_id = element_id


# Canonical key orders. Event keys follow the keyword listing order, with the
# gate `comment` and the `importance` extension at the tail.
DOCUMENT_KEYS = ("@id", "sdfVersion", "version", "events", "provenance")
EVENT_KEYS = (
    "@id",
    "name",
    "description",
    "wd_node",
    "wd_label",
    "wd_description",
    "isSchema",
    "repeatable",
    "optional",
    "children_gate",
    "outlinks",
    "participants",
    "children",
    "entities",
    "relations",
    "comment",
    "importance",
)
ENTITY_KEYS = ("@id", "name", "wd_node", "wd_label", "wd_description")
PARTICIPANT_KEYS = ("@id", "roleName", "entity")
RELATION_KEYS = (
    "@id",
    "name",
    "relationSubject",
    "relationObject",
    "wd_node",
    "wd_label",
    "wd_description",
)


def _require(obj: dict, key: str, path: str) -> Any:
    if key not in obj:
        raise MissingRequiredKey(f"{path}.{key}")
    return obj[key]


def _as_str(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise WrongType(path, "string")
    return value


def _as_opt_str(obj: dict, key: str, path: str) -> Optional[str]:
    if key not in obj:
        return None
    return _as_str(obj[key], f"{path}.{key}")


def _as_opt_bool(obj: dict, key: str, path: str) -> Optional[bool]:
    if key not in obj:
        return None
    value = obj[key]
    if not isinstance(value, bool):
        raise WrongType(f"{path}.{key}", "boolean")
    return value


def _as_str_list(obj: dict, key: str, path: str) -> list[str]:
    if key not in obj:
        return []
    value = obj[key]
    if not isinstance(value, list):
        raise WrongType(f"{path}.{key}", "array")
    out = []
    for i, item in enumerate(value):
        out.append(_as_str(item, f"{path}.{key}[{i}]"))
    return out


def _as_obj_list(obj: dict, key: str, path: str) -> list[tuple[dict, str]]:
    if key not in obj:
        return []
    value = obj[key]
    if not isinstance(value, list):
        raise WrongType(f"{path}.{key}", "array")
    out = []
    for i, item in enumerate(value):
        item_path = f"{path}.{key}[{i}]"
        if not isinstance(item, dict):
            raise WrongType(item_path, "object")
        out.append((item, item_path))
    return out


def _parse_grounding(obj: dict, path: str) -> Optional[WdGrounding]:
    grounding = WdGrounding(
        wd_node=_as_opt_str(obj, "wd_node", path),
        wd_label=_as_opt_str(obj, "wd_label", path),
        wd_description=_as_opt_str(obj, "wd_description", path),
    )
    return None if grounding.empty else grounding


def _extra(obj: dict, known: tuple[str, ...]) -> dict[str, Any]:
    return {k: v for k, v in obj.items() if k not in known}


def _parse_participant(obj: dict, path: str) -> ParticipantRecord:
    return ParticipantRecord(
        id=_as_str(_require(obj, "@id", path), f"{path}.@id"),
        role_name=_as_str(_require(obj, "roleName", path), f"{path}.roleName"),
        entity=_as_str(_require(obj, "entity", path), f"{path}.entity"),
        extra=_extra(obj, PARTICIPANT_KEYS),
    )


def _parse_entity(obj: dict, path: str) -> EntityRecord:
    return EntityRecord(
        id=_as_str(_require(obj, "@id", path), f"{path}.@id"),
        name=_as_str(_require(obj, "name", path), f"{path}.name"),
        grounding=_parse_grounding(obj, path),
        extra=_extra(obj, ENTITY_KEYS),
    )


def _parse_relation(obj: dict, path: str) -> RelationRecord:
    return RelationRecord(
        id=_as_str(_require(obj, "@id", path), f"{path}.@id"),
        name=_as_str(_require(obj, "name", path), f"{path}.name"),
        subject=_as_str(_require(obj, "relationSubject", path), f"{path}.relationSubject"),
        object=_as_str(_require(obj, "relationObject", path), f"{path}.relationObject"),
        grounding=_parse_grounding(obj, path),
        extra=_extra(obj, RELATION_KEYS),
    )


def _parse_event(obj: dict, path: str) -> EventNode:
    return EventNode(
        id=_as_str(_require(obj, "@id", path), f"{path}.@id"),
        name=_as_str(_require(obj, "name", path), f"{path}.name"),
        description=_as_opt_str(obj, "description", path),
        grounding=_parse_grounding(obj, path),
        is_schema=_as_opt_bool(obj, "isSchema", path),
        repeatable=_as_opt_bool(obj, "repeatable", path),
        optional_flag=_as_opt_bool(obj, "optional", path),
        children_gate=_as_opt_str(obj, "children_gate", path),
        outlinks=_as_str_list(obj, "outlinks", path),
        participants=[_parse_participant(o, p) for o, p in _as_obj_list(obj, "participants", path)],
        children=_as_str_list(obj, "children", path),
        entities=[_parse_entity(o, p) for o, p in _as_obj_list(obj, "entities", path)],
        relations=[_parse_relation(o, p) for o, p in _as_obj_list(obj, "relations", path)],
        gate_comment=_as_opt_str(obj, "comment", path),
        importance=obj.get("importance"),
        extra=_extra(obj, EVENT_KEYS),
    )


def parse_object(obj: Any) -> SchemaDocument:
    """Parse an already-decoded JSON value into a SchemaDocument."""
    if not isinstance(obj, dict):
        raise WrongType("$", "object")
    path = "$"
    doc = SchemaDocument(
        id=_as_str(_require(obj, "@id", path), "$.@id"),
        sdf_version=_as_str(_require(obj, "sdfVersion", path), "$.sdfVersion"),
        doc_version=_as_str(_require(obj, "version", path), "$.version"),
        extra=_extra(obj, DOCUMENT_KEYS),
    )
    events = _require(obj, "events", path)
    if not isinstance(events, list):
        raise WrongType("$.events", "array")
    for i, ev in enumerate(events):
        ev_path = f"$.events[{i}]"
        if not isinstance(ev, dict):
            raise WrongType(ev_path, "object")
        doc.events.append(_parse_event(ev, ev_path))

    if "provenance" in obj:
        prov = obj["provenance"]
        if not isinstance(prov, dict):
            raise WrongType("$.provenance", "object")
        for key, value in prov.items():
            doc.provenance_index[key] = _as_str(value, f"$.provenance.{key}")

    seen: set[str] = set()
    for element_id in doc.all_ids():
        if element_id in seen:
            raise DuplicateId(element_id)
        seen.add(element_id)
    return doc


def parse_schema(data: bytes | str) -> SchemaDocument:
    """Parse UTF-8 JSON bytes (or text) into a SchemaDocument.

    Raises MalformedJson, MissingRequiredKey, WrongType or DuplicateId.
    Cross-references are not checked here.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedJson(f"input is not valid UTF-8: {exc}") from exc
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MalformedJson(str(exc)) from exc
    return parse_object(obj)


def _grounding_items(grounding: Optional[WdGrounding]) -> list[tuple[str, Any]]:
    if grounding is None:
        return []
    items = []
    if grounding.wd_node is not None:
        items.append(("wd_node", grounding.wd_node))
    if grounding.wd_label is not None:
        items.append(("wd_label", grounding.wd_label))
    if grounding.wd_description is not None:
        items.append(("wd_description", grounding.wd_description))
    return items


def _participant_to_obj(part: ParticipantRecord) -> dict:
    out: dict[str, Any] = {"@id": part.id, "roleName": part.role_name, "entity": part.entity}
    out.update(part.extra)
    return out


def _entity_to_obj(ent: EntityRecord) -> dict:
    out: dict[str, Any] = {"@id": ent.id, "name": ent.name}
    out.update(_grounding_items(ent.grounding))
    out.update(ent.extra)
    return out


def _relation_to_obj(rel: RelationRecord) -> dict:
    out: dict[str, Any] = {
        "@id": rel.id,
        "name": rel.name,
        "relationSubject": rel.subject,
        "relationObject": rel.object,
    }
    out.update(_grounding_items(rel.grounding))
    out.update(rel.extra)
    return out


def _event_to_obj(ev: EventNode) -> dict:
    out: dict[str, Any] = {"@id": ev.id, "name": ev.name}
    if ev.description is not None:
        out["description"] = ev.description
    out.update(_grounding_items(ev.grounding))
    if ev.is_schema is not None:
        out["isSchema"] = ev.is_schema
    if ev.repeatable is not None:
        out["repeatable"] = ev.repeatable
    if ev.optional_flag is not None:
        out["optional"] = ev.optional_flag
    if ev.children_gate is not None:
        out["children_gate"] = ev.children_gate
    if ev.outlinks:
        out["outlinks"] = list(ev.outlinks)
    if ev.participants:
        out["participants"] = [_participant_to_obj(p) for p in ev.participants]
    if ev.children:
        out["children"] = list(ev.children)
    if ev.entities:
        out["entities"] = [_entity_to_obj(e) for e in ev.entities]
    if ev.relations:
        out["relations"] = [_relation_to_obj(r) for r in ev.relations]
    if ev.gate_comment is not None:
        out["comment"] = ev.gate_comment
    if ev.importance is not None:
        out["importance"] = ev.importance
    out.update(ev.extra)
    return out


def document_to_object(doc: SchemaDocument) -> dict:
    """Render a document as a plain JSON-compatible dict in canonical key order."""
    out: dict[str, Any] = {
        "@id": doc.id,
        "sdfVersion": doc.sdf_version,
        "version": doc.doc_version,
        "events": [_event_to_obj(ev) for ev in doc.events],
    }
    if doc.provenance_index:
        out["provenance"] = dict(doc.provenance_index)
    out.update(doc.extra)
    return out


def serialize_schema(doc: SchemaDocument) -> bytes:
    """Serialize a document to canonical UTF-8 JSON bytes."""
    text = json.dumps(document_to_object(doc), indent=2, ensure_ascii=False)
    return (text + "\n").encode("utf-8")
