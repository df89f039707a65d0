"""Graph-view topology for rendering: nodes, edges, style classes, DOT export.

Layout (coordinates) is a client concern; this module only derives what to
draw. Style mapping: chapters are dark diamonds (``chapter-dark``), optional
chapters light diamonds (``chapter-optional``), primitives ovals
(``primitive``); outlinks render as bold directed arrows and participants hang
off their event on dashed edges labeled with the role name.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .sdf.model import EventNode, SchemaDocument

NODE_KINDS = ("chapter", "primitive", "gate", "participant")
STYLE_CLASSES = ("chapter-dark", "chapter-optional", "primitive", "gate", "participant")
EDGE_STYLES = ("plain", "bold-arrow", "dashed-arrow")


@dataclass
class GraphNode:
    id: str
    label: str
    kind: str
    style_class: str

    def to_jsonable(self) -> dict:
        return {"id": self.id, "label": self.label, "kind": self.kind, "style_class": self.style_class}


@dataclass
class GraphEdge:
    source: str
    target: str
    kind: str
    label: str = ""
    style: str = "plain"

    def to_jsonable(self) -> dict:
        return {
            "source": self.source,
            "target": self.target,
            "kind": self.kind,
            "label": self.label,
            "style": self.style,
        }


@dataclass
class GraphView:
    nodes: list[GraphNode] = field(default_factory=list)
    edges: list[GraphEdge] = field(default_factory=list)

    def to_jsonable(self) -> dict:
        return {
            "nodes": [n.to_jsonable() for n in self.nodes],
            "edges": [e.to_jsonable() for e in self.edges],
        }


def event_style(ev: EventNode) -> tuple[str, str]:
    """(kind, style_class) for an event node."""
    if ev.is_gate:
        return "gate", "gate"
    if ev.is_chapter:
        return "chapter", "chapter-optional" if ev.optional_flag else "chapter-dark"
    return "primitive", "primitive"


def build_graph_view(doc: SchemaDocument) -> GraphView:
    """Derive the drawable topology of a document, in document order."""
    view = GraphView()
    event_ids = set(doc.event_ids())
    entity_names = {ent.id: ent.name for _, ent in doc.iter_entities()}

    for ev in doc.events:
        kind, style = event_style(ev)
        view.nodes.append(GraphNode(id=ev.id, label=ev.name, kind=kind, style_class=style))

    # One node per participant, labeled with its display name or entity name.
    entity_to_participants: dict[str, list[str]] = {}
    for ev, part in doc.iter_participants():
        label = part.extra.get("name") or entity_names.get(part.entity, part.entity)
        view.nodes.append(
            GraphNode(id=part.id, label=label, kind="participant", style_class="participant")
        )
        entity_to_participants.setdefault(part.entity, []).append(part.id)

    for ev in doc.events:
        for cid in ev.children:
            if cid in event_ids:
                view.edges.append(GraphEdge(source=ev.id, target=cid, kind="hierarchy"))
    for ev in doc.events:
        for oid in ev.outlinks:
            if oid in event_ids:
                view.edges.append(
                    GraphEdge(source=ev.id, target=oid, kind="outlink", style="bold-arrow")
                )
    for ev, part in doc.iter_participants():
        view.edges.append(
            GraphEdge(
                source=ev.id,
                target=part.id,
                kind="participant-role",
                label=part.role_name,
                style="dashed-arrow",
            )
        )
    # Relations join the first participant nodes of their endpoint entities;
    # relations whose entities never participate have nothing to attach to.
    for _, rel in doc.iter_relations():
        sources = entity_to_participants.get(rel.subject)
        targets = entity_to_participants.get(rel.object)
        if sources and targets:
            view.edges.append(
                GraphEdge(source=sources[0], target=targets[0], kind="relation", label=rel.name)
            )
    return view


_DOT_NODE_ATTRS = {
    "chapter-dark": 'shape=diamond, style=filled, fillcolor="#1f3b70", fontcolor=white',
    "chapter-optional": 'shape=diamond, style=filled, fillcolor="#a8c8f0"',
    "primitive": 'shape=oval, style=filled, fillcolor="#f5d76e"',
    "gate": 'shape=Msquare, style=filled, fillcolor="#d9d9d9"',
    "participant": 'shape=box, style="filled,rounded", fillcolor="#e8f0e8"',
}

_DOT_EDGE_ATTRS = {
    "plain": "",
    "bold-arrow": "penwidth=2.2",
    "dashed-arrow": "style=dashed",
}


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def to_dot(view: GraphView) -> str:
    """Render a GraphView as DOT text with style classes as attributes."""
    lines = ["digraph schema {", "  rankdir=TB;"]
    for node in view.nodes:
        attrs = _DOT_NODE_ATTRS[node.style_class]
        lines.append(
            f'  "{_dot_escape(node.id)}" [label="{_dot_escape(node.label)}", '
            f'class="{node.style_class}", {attrs}];'
        )
    for edge in view.edges:
        attrs = [f'class="{edge.kind}"']
        if edge.label:
            attrs.append(f'label="{_dot_escape(edge.label)}"')
        style = _DOT_EDGE_ATTRS[edge.style]
        if style:
            attrs.append(style)
        lines.append(
            f'  "{_dot_escape(edge.source)}" -> "{_dot_escape(edge.target)}" [{", ".join(attrs)}];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_dot(doc: SchemaDocument) -> str:
    return to_dot(build_graph_view(doc))
