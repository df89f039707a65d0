"""Automatic schema induction: skeleton, expansion, relation verification.

The generation backend is pluggable; the shipped :class:`StubBackend` replays
canned responses from a fixture mapping so the whole pipeline runs offline and
deterministically. Grounding against a Qnode catalog goes through a scorer
interface with a token-cosine default.

Fixture key format (see README for examples):

    "skeleton|<scenario>|<chapter>"                  -> list of sentences
    "expansion|<scenario>|<chapter>|<sentence>"      -> list of neighbor items
    "verification|<scenario>|<chapter>|<src>|<tgt>"  -> confidence in [0, 1]

A neighbor item is either a plain sentence (hierarchical child of the seed)
or an object ``{"sentence": ..., "kind": "temporal"|"hierarchical",
"direction": "forward"|"backward"}``.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .sdf.model import (
    PROVENANCE_INDUCED,
    EventNode,
    SchemaDocument,
    WdGrounding,
)
from .sdf.validation import validate

TEMPORAL = "temporal"
HIERARCHICAL = "hierarchical"

DEFAULT_SDF_VERSION = "1.0"


class BackendFailure(Exception):
    """The generation backend could not answer a prompt."""


class EmptyGeneration(Exception):
    """The backend produced no sentences for a skeleton request."""


class InconsistentEdges(Exception):
    """Assembly received an edge set that violates its structural contract."""


@dataclass
class InductionInput:
    scenario_name: str
    chapters: list[str]
    articles: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.chapters:
            raise ValueError("at least one chapter is required")


@dataclass
class CandidateEvent:
    sentence: str
    chapter: str
    grounding: Optional[tuple[str, float]] = None

    def __post_init__(self):
        if not self.sentence:
            raise ValueError("candidate sentence must be non-empty")


@dataclass
class EventEdge:
    source: int
    target: int
    kind: str
    confidence: float = 1.0

    def __post_init__(self):
        if self.source == self.target:
            raise ValueError("edge endpoints must differ")


@dataclass
class InductionConfig:
    edge_threshold: float = 0.5
    grounding_threshold: float = 0.5
    expansion_depth: int = 1

    def __post_init__(self):
        for name in ("edge_threshold", "grounding_threshold"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


class GenerationBackend:
    """Interface: answer one prompt per request kind.

    ``prompt("skeleton"|"expansion", context)`` returns a list;
    ``prompt("verification", context)`` returns a confidence float.
    """

    def prompt(self, kind: str, context: dict) -> Any:
        raise NotImplementedError


class StubBackend(GenerationBackend):
    """Deterministic fixture-keyed backend for offline runs and tests.

    Missing skeleton keys fail hard; missing expansion keys mean "no
    neighbors"; missing verification keys fall back to
    ``default_verification`` so structurally proposed edges survive.
    """

    def __init__(self, fixture: dict[str, Any], default_verification: float = 1.0):
        self.fixture = fixture
        self.default_verification = default_verification

    @classmethod
    def from_file(cls, path: str | Path, **kwargs) -> "StubBackend":
        with open(path, "r", encoding="utf-8") as handle:
            return cls(json.load(handle), **kwargs)

    def prompt(self, kind: str, context: dict) -> Any:
        scenario = context["scenario"]
        chapter = context["chapter"]
        if kind == "skeleton":
            key = f"skeleton|{scenario}|{chapter}"
            if key not in self.fixture:
                raise BackendFailure(f"fixture has no entry for '{key}'")
            value = self.fixture[key]
            if not isinstance(value, list):
                raise BackendFailure(f"fixture entry '{key}' must be a list")
            return value
        if kind == "expansion":
            key = f"expansion|{scenario}|{chapter}|{context['sentence']}"
            value = self.fixture.get(key, [])
            if not isinstance(value, list):
                raise BackendFailure(f"fixture entry '{key}' must be a list")
            return value
        if kind == "verification":
            key = f"verification|{scenario}|{chapter}|{context['source']}|{context['target']}"
            value = self.fixture.get(key, self.default_verification)
            if isinstance(value, list):
                value = value[0] if value else self.default_verification
            if not isinstance(value, (int, float)):
                raise BackendFailure(f"fixture entry '{key}' must be a number")
            return float(value)
        raise BackendFailure(f"unknown request kind '{kind}'")


class GroundingScorer:
    """Interface: similarity of two texts in [0, 1], symmetric, identity 1."""

    def score(self, text_a: str, text_b: str) -> float:
        raise NotImplementedError


class TokenCosineScorer(GroundingScorer):
    """Cosine similarity over lowercase token-count vectors."""

    def score(self, text_a: str, text_b: str) -> float:
        counts_a = Counter(text_a.lower().split())
        counts_b = Counter(text_b.lower().split())
        if not counts_a or not counts_b:
            return 0.0
        if counts_a == counts_b:
            return 1.0
        dot = sum(counts_a[token] * counts_b[token] for token in counts_a)
        norm = math.sqrt(sum(c * c for c in counts_a.values())) * math.sqrt(
            sum(c * c for c in counts_b.values())
        )
        return dot / norm


@dataclass
class QnodeEntry:
    qnode: str
    label: str
    definition: str


class QnodeCatalog:
    """Offline stand-in for a WikiData lookup: (qnode, label, definition) rows."""

    def __init__(self, entries: list[QnodeEntry]):
        seen = set()
        for entry in entries:
            if entry.qnode in seen:
                raise ValueError(f"duplicate qnode '{entry.qnode}' in catalog")
            seen.add(entry.qnode)
        self.entries = entries

    @classmethod
    def from_jsonable(cls, rows: list[dict]) -> "QnodeCatalog":
        return cls([QnodeEntry(r["qnode"], r["label"], r["definition"]) for r in rows])

    @classmethod
    def from_file(cls, path: str | Path) -> "QnodeCatalog":
        with open(path, "r", encoding="utf-8") as handle:
            return cls.from_jsonable(json.load(handle))

    def get(self, qnode: str) -> Optional[QnodeEntry]:
        for entry in self.entries:
            if entry.qnode == qnode:
                return entry
        return None

    def __len__(self) -> int:
        return len(self.entries)


def induce_skeleton(
    backend: GenerationBackend, input_spec: InductionInput, chapter: str
) -> tuple[list[CandidateEvent], list[EventEdge]]:
    """Round one: a linear chain of events for one chapter."""
    if chapter not in input_spec.chapters:
        raise ValueError(f"'{chapter}' is not one of the input chapters")
    sentences = backend.prompt(
        "skeleton",
        {"scenario": input_spec.scenario_name, "chapter": chapter, "articles": input_spec.articles},
    )
    if not sentences:
        raise EmptyGeneration(f"backend produced no events for chapter '{chapter}'")
    candidates = [CandidateEvent(sentence=s, chapter=chapter) for s in sentences]
    edges = [EventEdge(source=i, target=i + 1, kind=TEMPORAL) for i in range(len(candidates) - 1)]
    return candidates, edges


def _parse_neighbor(item: Any) -> tuple[str, str, str]:
    if isinstance(item, str):
        return item, HIERARCHICAL, "forward"
    if isinstance(item, dict):
        sentence = item.get("sentence", "")
        kind = item.get("kind", HIERARCHICAL)
        direction = item.get("direction", "forward")
        if kind not in (TEMPORAL, HIERARCHICAL) or direction not in ("forward", "backward"):
            raise BackendFailure(f"bad expansion item: {item!r}")
        return sentence, kind, direction
    raise BackendFailure(f"bad expansion item: {item!r}")


def expand_event(
    backend: GenerationBackend,
    input_spec: InductionInput,
    candidates: list[CandidateEvent],
    index: int,
) -> tuple[list[CandidateEvent], list[EventEdge]]:
    """Round two: neighbor events of one candidate, deduplicated against the pool.

    Returns the (possibly extended) candidate list and the new edges touching
    ``index``. A neighbor whose sentence matches an existing candidate
    case-insensitively is merged instead of re-added.
    """
    seed = candidates[index]
    items = backend.prompt(
        "expansion",
        {
            "scenario": input_spec.scenario_name,
            "chapter": seed.chapter,
            "sentence": seed.sentence,
            "articles": input_spec.articles,
        },
    )
    pool = list(candidates)
    by_lower = {c.sentence.lower(): i for i, c in enumerate(pool)}
    edges: list[EventEdge] = []
    seen_edges: set[tuple[int, int, str]] = set()
    for item in items:
        sentence, kind, direction = _parse_neighbor(item)
        if not sentence:
            continue
        key = sentence.lower()
        if key in by_lower:
            neighbor = by_lower[key]
        else:
            pool.append(CandidateEvent(sentence=sentence, chapter=seed.chapter))
            neighbor = len(pool) - 1
            by_lower[key] = neighbor
        if neighbor == index:
            continue
        source, target = (index, neighbor) if direction == "forward" else (neighbor, index)
        signature = (source, target, kind)
        if signature in seen_edges:
            continue
        seen_edges.add(signature)
        edges.append(EventEdge(source=source, target=target, kind=kind))
    return pool, edges


def _score_edges(
    backend: Optional[GenerationBackend],
    scenario: str,
    chapter: str,
    candidates: list[CandidateEvent],
    edges: list[EventEdge],
) -> list[EventEdge]:
    if backend is None:
        return list(edges)
    scored = []
    for edge in edges:
        confidence = backend.prompt(
            "verification",
            {
                "scenario": scenario,
                "chapter": chapter,
                "source": candidates[edge.source].sentence,
                "target": candidates[edge.target].sentence,
                "kind": edge.kind,
            },
        )
        scored.append(EventEdge(edge.source, edge.target, edge.kind, float(confidence)))
    return scored


def _removal_choice(edges: list[EventEdge]) -> EventEdge:
    """Greedy rule: minimum confidence, ties broken by removing the
    lexicographically-last (source, target) pair."""
    low = min(edge.confidence for edge in edges)
    tied = [edge for edge in edges if edge.confidence == low]
    return max(tied, key=lambda e: (e.source, e.target))


def _find_violation(edges: list[EventEdge], n: int) -> Optional[list[EventEdge]]:
    """First violated consistency constraint, as the implicated edge set."""
    temporal = [e for e in edges if e.kind == TEMPORAL]
    hierarchical = [e for e in edges if e.kind == HIERARCHICAL]

    # (b) temporal edges must form a DAG
    comp = _cyclic_component(temporal, n)
    if comp:
        return comp
    # (c) hierarchical edges must form a forest: in-degree <= 1, acyclic
    indegree: dict[int, list[EventEdge]] = {}
    for edge in hierarchical:
        indegree.setdefault(edge.target, []).append(edge)
    for target in sorted(indegree):
        if len(indegree[target]) > 1:
            return indegree[target]
    comp = _cyclic_component(hierarchical, n)
    if comp:
        return comp
    # (d) temporal edges must join hierarchy-siblings of the same kind
    parent = {e.target: e.source for e in hierarchical}
    has_children = {e.source for e in hierarchical}
    for edge in sorted(temporal, key=lambda e: (e.source, e.target)):
        same_parent = parent.get(edge.source) == parent.get(edge.target)
        same_kind = (edge.source in has_children) == (edge.target in has_children)
        if not (same_parent and same_kind):
            implicated = [edge]
            for h in hierarchical:
                if h.target in (edge.source, edge.target) or h.source in (
                    edge.source,
                    edge.target,
                ):
                    implicated.append(h)
            return implicated
    return None


def _cyclic_component(edges: list[EventEdge], n: int) -> Optional[list[EventEdge]]:
    """Edges of the first strongly-connected cycle, if any (Tarjan-free: plain
    iterative reachability is fine at candidate-set sizes)."""
    succ: dict[int, set[int]] = {}
    for edge in edges:
        succ.setdefault(edge.source, set()).add(edge.target)
    reach: dict[int, set[int]] = {i: set(succ.get(i, ())) for i in range(n)}
    changed = True
    while changed:
        changed = False
        for i in range(n):
            for j in list(reach[i]):
                extra = reach[j] - reach[i]
                if extra:
                    reach[i] |= extra
                    changed = True
    for i in range(n):
        if i in reach[i]:
            members = {i} | {j for j in reach[i] if i in reach[j]}
            comp = [e for e in edges if e.source in members and e.target in members]
            if comp:
                return comp
    return None


def verify_relations(
    backend: Optional[GenerationBackend],
    input_spec: InductionInput,
    chapter: str,
    candidates: list[CandidateEvent],
    edges: list[EventEdge],
    config: Optional[InductionConfig] = None,
) -> list[EventEdge]:
    """Round three: score every proposed edge and keep a consistent subset.

    Retained edges all have confidence >= the threshold; temporal edges form a
    DAG, hierarchical edges a forest, and temporal edges only join events that
    remain same-kind siblings. Consistency is restored by repeatedly dropping
    the minimum-confidence edge of a violated constraint.
    """
    if not candidates:
        raise ValueError("verify_relations requires a non-empty candidate set")
    config = config or InductionConfig()
    scored = _score_edges(backend, input_spec.scenario_name, chapter, candidates, edges)
    # Collapse parallel proposals of the same edge, keeping the best score.
    merged: dict[tuple[int, int, str], EventEdge] = {}
    for edge in scored:
        key = (edge.source, edge.target, edge.kind)
        if key not in merged or edge.confidence > merged[key].confidence:
            merged[key] = edge
    kept = [e for e in merged.values() if e.confidence >= config.edge_threshold]
    while True:
        violation = _find_violation(kept, len(candidates))
        if violation is None:
            return kept
        kept.remove(_removal_choice(violation))


def ground_event(
    scorer: GroundingScorer,
    candidate: CandidateEvent,
    catalog: QnodeCatalog,
    config: Optional[InductionConfig] = None,
) -> Optional[tuple[str, float]]:
    """Best-scoring Qnode for a candidate sentence, if above threshold.

    Ties keep the earliest catalog entry.
    """
    if not len(catalog):
        raise ValueError("catalog must be non-empty")
    config = config or InductionConfig()
    best: Optional[tuple[str, float]] = None
    for entry in catalog.entries:
        score = scorer.score(candidate.sentence, entry.definition)
        if best is None or score > best[1]:
            best = (entry.qnode, score)
    if best is not None and best[1] >= config.grounding_threshold:
        return best
    return None


def _slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-") or "schema"


@dataclass
class ChapterResult:
    chapter: str
    candidates: list[CandidateEvent]
    edges: list[EventEdge]


def assemble_schema(
    input_spec: InductionInput,
    results: list[ChapterResult],
    catalog: Optional[QnodeCatalog] = None,
    doc_id: Optional[str] = None,
) -> SchemaDocument:
    """Map verified per-chapter candidates and edges onto a schema document.

    Each input chapter becomes a chapter event (in order); candidates become
    its primitive children except where a hierarchical edge reparents them
    under their source (promoting the source). Temporal edges become outlinks.
    The result must validate cleanly or :class:`InconsistentEdges` is raised.
    """
    doc = SchemaDocument(
        id=doc_id or f"sci:schemas/{_slug(input_spec.scenario_name)}",
        sdf_version=DEFAULT_SDF_VERSION,
        doc_version="1",
    )
    counter = 0

    def next_id() -> str:
        nonlocal counter
        counter += 1
        return f"{doc.id}/Events/{counter}"

    by_chapter = {res.chapter: res for res in results}
    chapter_nodes: dict[str, EventNode] = {}
    for chapter in input_spec.chapters:
        node = EventNode(id=next_id(), name=chapter, is_schema=True)
        chapter_nodes[chapter] = node
        doc.events.append(node)
        doc.provenance_index[node.id] = PROVENANCE_INDUCED

    for chapter in input_spec.chapters:
        res = by_chapter.get(chapter)
        if res is None:
            continue
        nodes: list[EventNode] = []
        for cand in res.candidates:
            node = EventNode(id=next_id(), name=cand.sentence)
            if cand.grounding is not None and catalog is not None:
                entry = catalog.get(cand.grounding[0])
                if entry is not None:
                    node.grounding = WdGrounding(
                        wd_node=entry.qnode,
                        wd_label=entry.label,
                        wd_description=entry.definition,
                    )
            nodes.append(node)
            doc.events.append(node)
            doc.provenance_index[node.id] = PROVENANCE_INDUCED

        hierarchical_targets = set()
        for edge in res.edges:
            if edge.kind == HIERARCHICAL:
                parent_node = nodes[edge.source]
                parent_node.children.append(nodes[edge.target].id)
                parent_node.is_schema = True
                hierarchical_targets.add(edge.target)
            else:
                nodes[edge.source].outlinks.append(nodes[edge.target].id)
        chapter_node = chapter_nodes[chapter]
        chapter_node.children.extend(
            nodes[i].id for i in range(len(nodes)) if i not in hierarchical_targets
        )

    report = validate(doc)
    if report.errors():
        raise InconsistentEdges(
            "assembled document has structural errors: "
            + "; ".join(f"{v.code}({v.element_id})" for v in report.errors())
        )
    return doc


def run_induction(
    backend: GenerationBackend,
    input_spec: InductionInput,
    config: Optional[InductionConfig] = None,
    scorer: Optional[GroundingScorer] = None,
    catalog: Optional[QnodeCatalog] = None,
    doc_id: Optional[str] = None,
) -> SchemaDocument:
    """Full pipeline: skeleton, expansion, verification, grounding, assembly."""
    config = config or InductionConfig()
    results: list[ChapterResult] = []
    for chapter in input_spec.chapters:
        candidates, edges = induce_skeleton(backend, input_spec, chapter)
        frontier = list(range(len(candidates)))
        for _ in range(max(config.expansion_depth, 0)):
            added: list[int] = []
            for index in frontier:
                before = len(candidates)
                candidates, new_edges = expand_event(backend, input_spec, candidates, index)
                edges.extend(new_edges)
                added.extend(range(before, len(candidates)))
            if not added:
                break
            frontier = added
        edges = verify_relations(backend, input_spec, chapter, candidates, edges, config)
        if catalog is not None and len(catalog):
            active_scorer = scorer or TokenCosineScorer()
            for cand in candidates:
                cand.grounding = ground_event(active_scorer, cand, catalog, config)
        results.append(ChapterResult(chapter=chapter, candidates=candidates, edges=edges))
    return assemble_schema(input_spec, results, catalog=catalog, doc_id=doc_id)
