"""Random edit-command generator for the atomicity/replay property suites.

Produces a mix of valid and deliberately invalid envelopes against the
session's current document, so failure atomicity gets exercised alongside
successful application.
"""

from __future__ import annotations

import random

from sci.sdf import SchemaDocument, document_to_object

from docgen import WORDS, make_document


def _phrase(rng: random.Random) -> str:
    return " ".join(rng.choice(WORDS) for _ in range(rng.randint(1, 3)))


def _maybe_bogus(rng: random.Random, pool: list[str], p_bogus: float = 0.2) -> str:
    if not pool or rng.random() < p_bogus:
        return f"bogus:{rng.randint(0, 999)}"
    return rng.choice(pool)


def gen_command(rng: random.Random, doc: SchemaDocument) -> tuple[str, dict]:
    events = doc.event_ids()
    entities = [ent.id for _, ent in doc.iter_entities()]
    gates = [ev.id for ev in doc.events if ev.is_gate]
    participants = [p.id for _, p in doc.iter_participants()]
    relations = [r.id for _, r in doc.iter_relations()]
    everything = events + entities + participants + relations

    op = rng.choices(
        (
            "AddEvent",
            "AddParticipant",
            "AddRelation",
            "AddOutlink",
            "AddXorGate",
            "AddEntity",
            "LinkGateChild",
            "UpdateEvent",
            "RemoveElement",
            "ReplaceDocument",
        ),
        weights=(22, 12, 8, 12, 6, 12, 6, 12, 8, 2),
    )[0]

    if op == "AddEvent":
        parent = None if rng.random() < 0.3 else _maybe_bogus(rng, events)
        return op, {
            "parent": parent,
            "name": "" if rng.random() < 0.05 else _phrase(rng),
            "description": _phrase(rng) if rng.random() < 0.5 else "",
            "is_chapter": rng.random() < 0.4,
        }
    if op == "AddParticipant":
        if entities and rng.random() < 0.6:
            entity = _maybe_bogus(rng, entities)
        else:
            entity = {"name": _phrase(rng)}
        return op, {
            "event": _maybe_bogus(rng, events),
            "role_name": "" if rng.random() < 0.05 else rng.choice(("agent", "patient", "place")),
            "participant_name": _phrase(rng) if rng.random() < 0.3 else "",
            "entity": entity,
        }
    if op == "AddRelation":
        return op, {
            "subject": _maybe_bogus(rng, entities),
            "name": _phrase(rng),
            "object": _maybe_bogus(rng, entities),
        }
    if op == "AddOutlink":
        return op, {
            "source": _maybe_bogus(rng, events, 0.1),
            "target": _maybe_bogus(rng, events, 0.1),
            "strict": rng.random() < 0.3,
        }
    if op == "AddXorGate":
        return op, {"parent": _maybe_bogus(rng, events), "name": f"{_phrase(rng)} gate"}
    if op == "AddEntity":
        return op, {
            "scope_event": _maybe_bogus(rng, events),
            "name": "" if rng.random() < 0.05 else _phrase(rng),
        }
    if op == "LinkGateChild":
        return op, {
            "gate": _maybe_bogus(rng, gates or events),
            "event": _maybe_bogus(rng, events),
        }
    if op == "UpdateEvent":
        patch: dict = {}
        for key, value in (
            ("name", _phrase(rng)),
            ("description", _phrase(rng)),
            ("repeatable", rng.random() < 0.5),
            ("optional_flag", rng.random() < 0.5),
            ("importance", rng.choice([1, 2, "high"])),
        ):
            if rng.random() < 0.4:
                patch[key] = value
        return op, {"event": _maybe_bogus(rng, events, 0.1), "patch": patch}
    if op == "RemoveElement":
        return op, {"element": _maybe_bogus(rng, everything, 0.1)}
    return op, {"document": document_to_object(make_document(rng, max_events=4))}
