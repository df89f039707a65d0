"""Edit engine: commands, atomicity, undo/redo, deterministic replay."""

import json
import random

import pytest

from sci.edits import (
    DocumentSession,
    EditError,
    add_entity,
    add_event,
    add_outlink,
    add_participant,
    add_relation,
    add_xor_gate,
    bump_version,
    link_gate_child,
    list_entities,
    remove_element,
    replace_document,
    replay,
    update_event,
)
from sci.sdf import parse_schema, serialize_schema, validate
from sci.sdf.validation import GATE_EMPTY, SELF_RELATION

from cmdgen import gen_command
from docgen import make_document


def base_doc():
    data = {
        "@id": "doc:riot",
        "sdfVersion": "3.0",
        "version": "1",
        "events": [
            {
                "@id": "ev:attack",
                "name": "attack",
                "isSchema": True,
                "children": ["ev:detonate", "ev:flee"],
            },
            {
                "@id": "ev:detonate",
                "name": "detonate bomb",
                "entities": [{"@id": "ent:bomb", "name": "IED"}],
            },
            {
                "@id": "ev:flee",
                "name": "flee scene",
                "entities": [{"@id": "ent:crowd", "name": "crowd"}],
            },
        ],
    }
    return parse_schema(json.dumps(data).encode())


def test_bump_version():
    assert bump_version("1") == "1.1"
    assert bump_version("1.1") == "1.2"
    assert bump_version("3.0.9") == "3.0.10"


def test_add_event_under_chapter():
    doc = base_doc()
    doc2, new_id = add_event(doc, "ev:attack", "plant bomb")
    assert new_id == "doc:riot/Events/1"
    chapter = doc2.get_event("ev:attack")
    assert chapter.children[-1] == new_id
    assert chapter.is_schema is True
    assert doc2.provenance_index[new_id] == "curated"
    assert doc2.doc_version == "1.1"
    # original untouched
    assert doc.get_event("ev:attack").children == ["ev:detonate", "ev:flee"]


def test_add_event_chapter_switch_sets_style_kind():
    doc, new_id = add_event(base_doc(), None, "aftermath", is_chapter=True)
    node = doc.get_event(new_id)
    assert node.is_schema is True
    assert node.is_chapter
    # declared chapter without children validates with a warning, not an error
    report = validate(doc)
    assert report.errors() == []


def test_add_event_errors():
    doc = base_doc()
    with pytest.raises(EditError) as err:
        add_event(doc, "ev:none", "x")
    assert err.value.code == "ParentNotFound"
    with pytest.raises(EditError) as err:
        add_event(doc, "ev:detonate", "x")
    assert err.value.code == "ParentIsPrimitive"
    with pytest.raises(EditError) as err:
        add_event(doc, "ev:attack", "")
    assert err.value.code == "EmptyName"


def test_event_ids_are_sequential_and_replayable():
    session = DocumentSession(base_doc())
    ids = [
        session.apply("AddEvent", {"parent": "ev:attack", "name": f"step {i}"}).created_ids[0]
        for i in range(3)
    ]
    assert ids == [f"doc:riot/Events/{n}" for n in (1, 2, 3)]
    replayed = replay(session.initial, session.log)
    assert serialize_schema(replayed) == serialize_schema(session.current)


def test_add_participant_with_existing_entity():
    doc = base_doc()
    doc2, pid = add_participant(doc, "ev:detonate", "attacker", "perp", entity="ent:crowd")
    part = doc2.get_event("ev:detonate").participants[0]
    assert part.id == pid and part.entity == "ent:crowd" and part.role_name == "attacker"
    overview = {e.id: e for e in list_entities(doc2)}
    assert overview["ent:crowd"].participating_events == ["ev:detonate"]


def test_add_participant_with_new_entity_spec():
    doc2, pid = add_participant(
        base_doc(),
        "ev:detonate",
        "instrument",
        "",
        entity={"name": "timer", "grounding": {"wd_node": "Q1", "wd_label": "t", "wd_description": "d"}},
    )
    ent = doc2.get_event("ev:detonate").entities[-1]
    assert ent.name == "timer" and ent.grounding.wd_node == "Q1"
    assert doc2.get_event("ev:detonate").participants[0].entity == ent.id
    assert doc2.provenance_index[ent.id] == "curated"


def test_add_participant_errors():
    doc = base_doc()
    for args, code in [
        (("ev:none", "agent", "", "ent:bomb"), "EventNotFound"),
        (("ev:attack", "agent", "", "ent:bomb"), "EventIsChapter"),
        (("ev:detonate", "", "", "ent:bomb"), "EmptyRole"),
        (("ev:detonate", "agent", "", "ent:none"), "EntityNotFound"),
    ]:
        with pytest.raises(EditError) as err:
            add_participant(doc, *args[:3], entity=args[3])
        assert err.value.code == code


def test_add_relation_stored_under_subject_event():
    doc = base_doc()
    doc2, rid = add_relation(doc, "ent:crowd", "flees from", "ent:bomb")
    host = doc2.get_event("ev:flee")  # ent:crowd is declared there
    assert host.relations[0].id == rid
    assert host.relations[0].subject == "ent:crowd"
    assert host.relations[0].object == "ent:bomb"


def test_add_relation_with_grounding_serializes_wd_keys():
    doc2, _ = add_relation(
        base_doc(),
        "ent:crowd",
        "disperses",
        "ent:bomb",
        grounding={"wd_node": "Q999", "wd_label": "disperse", "wd_description": "scatter"},
    )
    data = serialize_schema(doc2).decode()
    assert '"wd_node": "Q999"' in data and '"wd_label": "disperse"' in data


def test_self_relation_accepted_with_warning():
    doc2, _ = add_relation(base_doc(), "ent:crowd", "self-links", "ent:crowd")
    report = validate(doc2)
    assert SELF_RELATION in [v.code for v in report.warnings()]
    assert report.errors() == []


def test_add_outlink_and_guards():
    doc = base_doc()
    doc2 = add_outlink(doc, "ev:detonate", "ev:flee")
    assert doc2.get_event("ev:detonate").outlinks == ["ev:flee"]
    with pytest.raises(EditError) as err:
        add_outlink(doc2, "ev:detonate", "ev:flee")
    assert err.value.code == "DuplicateOutlink"
    with pytest.raises(EditError) as err:
        add_outlink(doc2, "ev:attack", "ev:flee")
    assert err.value.code == "KindMismatch"
    with pytest.raises(EditError) as err:
        add_outlink(doc2, "ev:flee", "ev:detonate")
    assert err.value.code == "WouldCreateTemporalCycle"


def test_outlink_cycle_guard_matches_reachability_oracle():
    rng = random.Random(5)
    for _ in range(40):
        k = rng.randint(2, 6)
        names = [f"c{i}" for i in range(k)]
        data = {
            "@id": "doc:t",
            "sdfVersion": "3.0",
            "version": "1",
            "events": [{"@id": "p", "name": "p", "isSchema": True, "children": names}]
            + [{"@id": n, "name": n} for n in names],
        }
        doc = parse_schema(json.dumps(data).encode())
        edges = []
        for i in range(k):
            for j in range(i + 1, k):
                if rng.random() < 0.35:
                    doc = add_outlink(doc, names[i], names[j])
                    edges.append((i, j))
        # oracle: candidate edge (s, t) closes a cycle iff t already reaches s
        reach = {i: {i} for i in range(k)}
        changed = True
        while changed:
            changed = False
            for a, b in edges:
                for i in range(k):
                    if a in reach[i] and b not in reach[i]:
                        reach[i].add(b)
                        changed = True
        s, t = rng.randrange(k), rng.randrange(k)
        existing = (s, t) in edges
        expect_cycle = s in reach[t]
        if existing:
            continue
        try:
            add_outlink(doc, names[s], names[t])
            created = True
        except EditError as err:
            assert err.code == "WouldCreateTemporalCycle"
            created = False
        assert created != expect_cycle


def test_cross_parent_outlink_strict_vs_lenient():
    data = {
        "@id": "doc:t",
        "sdfVersion": "3.0",
        "version": "1",
        "events": [
            {"@id": "p1", "name": "p1", "isSchema": True, "children": ["a"]},
            {"@id": "p2", "name": "p2", "isSchema": True, "children": ["b"]},
            {"@id": "a", "name": "a"},
            {"@id": "b", "name": "b"},
        ],
    }
    doc = parse_schema(json.dumps(data).encode())
    with pytest.raises(EditError) as err:
        add_outlink(doc, "a", "b", strict=True)
    assert err.value.code == "CrossParent"
    doc2 = add_outlink(doc, "a", "b")
    assert validate(doc2).errors() == []


def test_xor_gate_lifecycle():
    doc = base_doc()
    doc, gate_id = add_xor_gate(doc, "ev:attack", "escalation-choice")
    gate = doc.get_event(gate_id)
    assert gate.is_gate and gate.children_gate == "xor"
    data = serialize_schema(doc).decode()
    assert '"comment": "container node"' in data and '"children_gate": "xor"' in data
    assert GATE_EMPTY in validate(doc).codes()

    doc = link_gate_child(doc, gate_id, "ev:detonate")
    doc = link_gate_child(doc, gate_id, "ev:flee")
    gate = doc.get_event(gate_id)
    assert gate.children == ["ev:detonate", "ev:flee"]
    assert gate.is_schema is True
    assert doc.get_event("ev:attack").children == [gate_id]
    assert validate(doc).errors() == []


def test_gate_errors():
    doc = base_doc()
    with pytest.raises(EditError) as err:
        add_xor_gate(doc, "ev:detonate", "g")
    assert err.value.code == "ParentIsPrimitive"
    doc, gate_id = add_xor_gate(doc, "ev:attack", "g")
    with pytest.raises(EditError) as err:
        link_gate_child(doc, "ev:detonate", "ev:flee")
    assert err.value.code == "NotAGate"
    with pytest.raises(EditError) as err:
        link_gate_child(doc, gate_id, "ev:attack")
    assert err.value.code == "WouldCreateHierarchyCycle"


def test_add_entity_and_ids():
    doc = base_doc()
    doc, e1 = add_entity(doc, "ev:detonate", "wire", grounding={"wd_node": "Q2", "wd_label": "w", "wd_description": "d"})
    doc, e2 = add_entity(doc, "ev:flee", "exit route")
    assert (e1, e2) == ("doc:riot/Entities/1", "doc:riot/Entities/2")
    serialized = serialize_schema(doc).decode()
    assert '"wd_node": "Q2"' in serialized
    with pytest.raises(EditError) as err:
        add_entity(doc, "ev:detonate", "")
    assert err.value.code == "EmptyName"


def test_list_entities_matches_full_scan_oracle():
    rng = random.Random(11)
    for _ in range(30):
        doc = make_document(rng)
        overview = list_entities(doc)
        # oracle: independent full-document scan
        expected = []
        for ev in doc.events:
            for ent in ev.entities:
                events_with = []
                for other in doc.events:
                    if any(p.entity == ent.id for p in other.participants):
                        events_with.append(other.id)
                expected.append((ent.id, ent.name, events_with))
        assert [(o.id, o.name, o.participating_events) for o in overview] == expected


def test_update_event():
    doc = base_doc()
    doc2 = update_event(doc, "ev:attack", {"optional_flag": True})
    assert doc2.get_event("ev:attack").optional_flag is True
    doc3 = update_event(doc2, "ev:detonate", {"repeatable": True})
    assert b'"repeatable": true' in serialize_schema(doc3)
    with pytest.raises(EditError) as err:
        update_event(doc, "ev:attack", {})
    assert err.value.code == "EmptyPatch"
    with pytest.raises(EditError) as err:
        update_event(doc, "ev:attack", {"children": ["x"]})
    assert err.value.code == "UnknownField"
    # untouched fields survive
    assert doc3.get_event("ev:detonate").name == "detonate bomb"


def test_remove_element_cascades():
    doc = base_doc()
    doc, pid = add_participant(doc, "ev:detonate", "agent", "", entity="ent:crowd")
    doc, rid = add_relation(doc, "ent:crowd", "watches", "ent:bomb")
    # removing the entity removes the referencing participant and relation
    doc2 = remove_element(doc, "ent:crowd")
    assert doc2.get_entity("ent:crowd") is None
    assert all(p.entity != "ent:crowd" for _, p in doc2.iter_participants())
    assert list(doc2.iter_relations()) == []
    assert pid not in doc2.provenance_index and rid not in doc2.provenance_index
    # removing a chapter removes the subtree and inbound outlinks
    doc3 = remove_element(doc, "ev:attack")
    assert doc3.events == []
    with pytest.raises(EditError) as err:
        remove_element(doc, "nothing")
    assert err.value.code == "ElementNotFound"


def test_replace_document_and_undo_bytes():
    session = DocumentSession(base_doc())
    before = serialize_schema(session.current)
    renamed = json.loads(serialize_schema(session.current).decode())
    renamed["events"][0]["name"] = "coordinated attack"
    session.apply("ReplaceDocument", {"document": renamed})
    assert session.current.get_event("ev:attack").name == "coordinated attack"
    session.undo()
    assert serialize_schema(session.current) == before


def test_replace_document_rejects_malformed():
    doc = base_doc()
    with pytest.raises(Exception):
        replace_document(doc, b"{broken")
    # pure function: original is untouched by failures
    assert doc.get_event("ev:attack") is not None


def test_undo_redo_bounds():
    session = DocumentSession(base_doc())
    with pytest.raises(EditError) as err:
        session.undo()
    assert err.value.code == "NothingToUndo"
    session.apply("AddEvent", {"parent": "ev:attack", "name": "x"})
    session.undo()
    with pytest.raises(EditError) as err:
        session.undo()
    assert err.value.code == "NothingToUndo"
    session.redo()
    with pytest.raises(EditError) as err:
        session.redo()
    assert err.value.code == "NothingToRedo"
    # a fresh command clears the redo stack
    session.undo()
    session.apply("AddEvent", {"parent": "ev:attack", "name": "y"})
    with pytest.raises(EditError):
        session.redo()


def test_random_sequences_atomic_replayable_and_never_corrupting():
    rng = random.Random(2024)
    for round_no in range(40):
        initial = make_document(rng, max_events=8)
        session = DocumentSession(initial)
        initial_bytes = serialize_schema(initial)
        baseline_errors = {(v.code, v.element_id) for v in validate(initial).errors()}
        for _ in range(rng.randint(1, 15)):
            op, args = gen_command(rng, session.current)
            before = serialize_schema(session.current)
            try:
                session.apply(op, args)
            except EditError:
                assert serialize_schema(session.current) == before
                continue
            errors_now = {(v.code, v.element_id) for v in validate(session.current).errors()}
            if op == "ReplaceDocument":
                baseline_errors = errors_now  # editor path owns its content
            else:
                new_errors = errors_now - baseline_errors
                assert not new_errors, (op, args, new_errors)
                baseline_errors |= errors_now
        final_bytes = serialize_schema(session.current)
        assert serialize_schema(replay(initial, session.log)) == final_bytes
        applied = len(session.log)
        for _ in range(applied):
            session.undo()
        assert serialize_schema(session.current) == initial_bytes
        for _ in range(applied):
            session.redo()
        assert serialize_schema(session.current) == final_bytes
