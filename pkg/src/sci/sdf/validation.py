"""Structural validation and temporal ordering for schema documents.

Every invariant violation is reported, never thrown: ``validate`` returns a
:class:`ValidationReport` listing one :class:`Violation` per problem. Parse
already guarantees id uniqueness, so validation focuses on cross-references,
hierarchy shape, outlink consistency and gate rules.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, Sequence

from .model import EventNode, GATE_KINDS, SchemaDocument

# Violation codes.
DANGLING_REF = "DANGLING_REF"
HIERARCHY_CYCLE = "HIERARCHY_CYCLE"
MULTIPLE_PARENTS = "MULTIPLE_PARENTS"
OUTLINK_KIND_MISMATCH = "OUTLINK_KIND_MISMATCH"
OUTLINK_CROSS_PARENT = "OUTLINK_CROSS_PARENT"
TEMPORAL_CYCLE = "TEMPORAL_CYCLE"
IS_SCHEMA_MISMATCH = "IS_SCHEMA_MISMATCH"
GATE_ILLEGAL_FIELDS = "GATE_ILLEGAL_FIELDS"
BAD_GATE_KIND = "BAD_GATE_KIND"
GATE_EMPTY = "GATE_EMPTY"
SELF_RELATION = "SELF_RELATION"
PARTIAL_GROUNDING = "PARTIAL_GROUNDING"
EMPTY_NAME = "EMPTY_NAME"

ERROR = "error"
WARNING = "warning"


@dataclass
class Violation:
    code: str
    element_id: str
    message: str
    severity: str

    def to_jsonable(self) -> dict[str, str]:
        return {
            "code": self.code,
            "element_id": self.element_id,
            "message": self.message,
            "severity": self.severity,
        }


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def errors(self) -> list[Violation]:
        return [v for v in self.violations if v.severity == ERROR]

    def warnings(self) -> list[Violation]:
        return [v for v in self.violations if v.severity == WARNING]

    def codes(self) -> list[str]:
        return [v.code for v in self.violations]

    def to_jsonable(self) -> list[dict[str, str]]:
        return [v.to_jsonable() for v in self.violations]


class TemporalCycleError(Exception):
    """Raised by temporal_order when sibling outlinks are cyclic."""

    def __init__(self, ids: list[str]):
        super().__init__(f"temporal cycle among events: {', '.join(ids)}")
        self.ids = ids


class NotAChapterError(Exception):
    """Raised by temporal_order when the given parent has no children."""

    def __init__(self, event_id: str, reason: str = "is not a chapter event"):
        super().__init__(f"{event_id} {reason}")
        self.event_id = event_id


def has_cycle(order: Sequence[Hashable], successors: Callable[[Hashable], Iterable[Hashable]]) -> bool:
    """Detect a directed cycle with an iterative three-color DFS.

    ``order`` fixes the node set and scan order; ``successors`` maps a node to
    its out-neighbors (must stay within ``order``). Self-loops count.
    """
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {node: WHITE for node in order}
    for root in order:
        if color[root] != WHITE:
            continue
        stack: list[tuple[Hashable, Any]] = [(root, iter(successors(root)))]
        color[root] = GRAY
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if color[nxt] == GRAY:
                    return True
                if color[nxt] == WHITE:
                    color[nxt] = GRAY
                    stack.append((nxt, iter(successors(nxt))))
                    advanced = True
                    break
            if not advanced:
                color[node] = BLACK
                stack.pop()
    return False


def cycle_components(
    order: Sequence[Hashable], successors: Callable[[Hashable], Iterable[Hashable]]
) -> list[list[Hashable]]:
    """Strongly-connected components that contain a cycle.

    Returns SCCs of size >= 2 plus self-loop singletons, each listed in
    ``order`` and sorted by the position of their first member.
    """
    index: dict[Hashable, int] = {}
    low: dict[Hashable, int] = {}
    on_stack: set[Hashable] = set()
    stack: list[Hashable] = []
    counter = [0]
    components: list[list[Hashable]] = []
    pos = {node: i for i, node in enumerate(order)}

    for root in order:
        if root in index:
            continue
        # Iterative Tarjan: frames of (node, successor iterator).
        work: list[tuple[Hashable, Any]] = [(root, None)]
        while work:
            node, it = work.pop()
            if it is None:
                index[node] = low[node] = counter[0]
                counter[0] += 1
                stack.append(node)
                on_stack.add(node)
                it = iter(list(successors(node)))
            recurse = False
            for nxt in it:
                if nxt not in index:
                    work.append((node, it))
                    work.append((nxt, None))
                    recurse = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if recurse:
                continue
            if low[node] == index[node]:
                comp = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    comp.append(member)
                    if member == node:
                        break
                if len(comp) > 1 or node in set(successors(node)):
                    components.append(sorted(comp, key=pos.__getitem__))
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
    components.sort(key=lambda comp: pos[comp[0]])
    return components


def _node_kind(ev: EventNode) -> str:
    if ev.is_gate:
        return "gate"
    return "chapter" if ev.is_chapter else "primitive"


def _check_grounding(element, report: ValidationReport) -> None:
    g = element.grounding
    if g is not None and not g.complete:
        present = [
            k for k in ("wd_node", "wd_label", "wd_description") if getattr(g, k) is not None
        ]
        report.violations.append(
            Violation(
                PARTIAL_GROUNDING,
                element.id,
                f"grounding is partial (only {', '.join(present)} present)",
                WARNING,
            )
        )


def _dangling(report: ValidationReport, referrer: str, target: str, what: str) -> None:
    report.violations.append(
        Violation(DANGLING_REF, referrer, f"{what} reference '{target}' does not resolve", ERROR)
    )


def validate(doc: SchemaDocument) -> ValidationReport:
    """Check every structural invariant and report the violations found."""
    report = ValidationReport()
    events_by_id = {ev.id: ev for ev in doc.events}
    entity_ids = {ent.id for _, ent in doc.iter_entities()}

    for ev in doc.events:
        if ev.children_gate is not None and ev.children_gate not in GATE_KINDS:
            report.violations.append(
                Violation(
                    BAD_GATE_KIND,
                    ev.id,
                    f"children_gate must be one of {GATE_KINDS}, got '{ev.children_gate}'",
                    ERROR,
                )
            )
        if ev.children_gate is not None and not ev.children:
            report.violations.append(
                Violation(GATE_EMPTY, ev.id, "children_gate set but no children linked", WARNING)
            )
        if ev.is_gate and (ev.participants or ev.entities or ev.relations or ev.grounding):
            report.violations.append(
                Violation(
                    GATE_ILLEGAL_FIELDS,
                    ev.id,
                    "logic gate must not carry participants, entities, relations or grounding",
                    ERROR,
                )
            )
        if ev.children and not ev.is_schema:
            report.violations.append(
                Violation(
                    IS_SCHEMA_MISMATCH,
                    ev.id,
                    "event has children but isSchema is not true",
                    ERROR,
                )
            )
        elif ev.is_schema and not ev.children:
            report.violations.append(
                Violation(
                    IS_SCHEMA_MISMATCH,
                    ev.id,
                    "isSchema is true but the event has no children yet",
                    WARNING,
                )
            )
        _check_grounding(ev, report)

        for cid in ev.children:
            if cid not in events_by_id:
                _dangling(report, ev.id, cid, "child")
        for oid in ev.outlinks:
            if oid not in events_by_id:
                _dangling(report, ev.id, oid, "outlink")
        for part in ev.participants:
            if part.entity not in entity_ids:
                _dangling(report, part.id, part.entity, "participant entity")
        for ent in ev.entities:
            if not ent.name:
                report.violations.append(
                    Violation(EMPTY_NAME, ent.id, "entity name must be non-empty", ERROR)
                )
            _check_grounding(ent, report)
        for rel in ev.relations:
            if rel.subject not in entity_ids:
                _dangling(report, rel.id, rel.subject, "relation subject")
            if rel.object not in entity_ids:
                _dangling(report, rel.id, rel.object, "relation object")
            if rel.subject == rel.object:
                report.violations.append(
                    Violation(
                        SELF_RELATION,
                        rel.id,
                        f"relation links entity '{rel.subject}' to itself",
                        WARNING,
                    )
                )
            _check_grounding(rel, report)

    # Hierarchy shape: at most one parent per event, no directed cycles.
    parent_count: dict[str, int] = {}
    for ev in doc.events:
        for cid in ev.children:
            if cid in events_by_id:
                parent_count[cid] = parent_count.get(cid, 0) + 1
    for ev in doc.events:
        if parent_count.get(ev.id, 0) > 1:
            report.violations.append(
                Violation(
                    MULTIPLE_PARENTS,
                    ev.id,
                    f"event is listed as a child {parent_count[ev.id]} times",
                    ERROR,
                )
            )

    order = [ev.id for ev in doc.events]

    def child_succ(eid: str) -> list[str]:
        return [cid for cid in events_by_id[eid].children if cid in events_by_id]

    if has_cycle(order, child_succ):
        for comp in cycle_components(order, child_succ):
            report.violations.append(
                Violation(
                    HIERARCHY_CYCLE,
                    comp[0],
                    f"hierarchy cycle among events: {', '.join(comp)}",
                    ERROR,
                )
            )

    # Outlink consistency per sibling group (roots form their own group).
    parent_of: dict[str, str] = {}
    for ev in doc.events:
        for cid in ev.children:
            if cid in events_by_id and cid not in parent_of:
                parent_of[cid] = ev.id
    groups: list[list[str]] = [doc.root_ids()]
    groups.extend([cid for cid in ev.children if cid in events_by_id] for ev in doc.events)

    for ev in doc.events:
        for target_id in ev.outlinks:
            target = events_by_id.get(target_id)
            if target is None:
                continue
            if parent_of.get(ev.id) != parent_of.get(target_id):
                report.violations.append(
                    Violation(
                        OUTLINK_CROSS_PARENT,
                        ev.id,
                        f"outlink to '{target_id}' crosses parent boundaries",
                        WARNING,
                    )
                )
            a_kind, b_kind = _node_kind(ev), _node_kind(target)
            if "gate" not in (a_kind, b_kind) and a_kind != b_kind:
                report.violations.append(
                    Violation(
                        OUTLINK_KIND_MISMATCH,
                        ev.id,
                        f"outlink {a_kind} -> {b_kind} ('{target_id}') must join same-kind events",
                        ERROR,
                    )
                )

    for group in groups:
        if len(group) == 0:
            continue
        members = set(group)

        def group_succ(eid: str, _members=members) -> list[str]:
            return [t for t in events_by_id[eid].outlinks if t in _members]

        if has_cycle(group, group_succ):
            for comp in cycle_components(group, group_succ):
                report.violations.append(
                    Violation(
                        TEMPORAL_CYCLE,
                        comp[0],
                        f"outlink cycle among sibling events: {', '.join(comp)}",
                        ERROR,
                    )
                )

    return report


def temporal_order(doc: SchemaDocument, parent_id: str) -> list[str]:
    """Topologically order a chapter's children under their outlink edges.

    Ties are broken by the original position in the parent's ``children``
    array, so the result is stable and deterministic.
    """
    parent = doc.get_event(parent_id)
    if parent is None:
        raise NotAChapterError(parent_id, "does not exist")
    if not parent.children:
        raise NotAChapterError(parent_id)

    events_by_id = {ev.id: ev for ev in doc.events}
    group = [cid for cid in parent.children if cid in events_by_id]
    members = set(group)
    pos = {eid: i for i, eid in enumerate(group)}

    indegree = {eid: 0 for eid in group}
    for eid in group:
        for target in events_by_id[eid].outlinks:
            if target in members:
                indegree[target] += 1

    ready = [pos[eid] for eid in group if indegree[eid] == 0]
    heapq.heapify(ready)
    result: list[str] = []
    while ready:
        eid = group[heapq.heappop(ready)]
        result.append(eid)
        for target in events_by_id[eid].outlinks:
            if target in members:
                indegree[target] -= 1
                if indegree[target] == 0:
                    heapq.heappush(ready, pos[target])
    if len(result) < len(group):
        leftover = [eid for eid in group if eid not in set(result)]
        raise TemporalCycleError(leftover)
    return result
