"""Post-prediction event processing and coverage statistics.

A prediction run yields matched and unmatched event instances. The pipeline
here shortens the unmatched list into a curation worklist: drop fine-grained
verbs, recover instances that actually name a schema event (text encode and
match), then rank what remains by frequency. Coverage statistics compare
induced against curated element counts across a schema library.

Instance file: JSON array of
``{"surface": str, "matched": bool, "count": int, "suggested_args": [{"role", "name"}]}``.
Worklist file: JSON array of ``{"surface", "count", "suggested_args", "rank"}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .sdf.model import PROVENANCE_CURATED, PROVENANCE_INDUCED, SchemaDocument

# Verbs too fine-grained for a high-level schema; extend via a stoplist file.
DEFAULT_STOPLIST = frozenset(
    {"go", "use", "do", "be", "have", "get", "make", "take", "come", "put", "say"}
)


class MissingProvenance(Exception):
    def __init__(self, element_id: str):
        super().__init__(f"element '{element_id}' carries no provenance tag")
        self.element_id = element_id


@dataclass
class EventInstance:
    """One extracted event mention, with its occurrence count."""

    surface: str
    matched: bool
    count: int = 1
    suggested_args: list[tuple[str, str]] = field(default_factory=list)
    matched_event: Optional[str] = None

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("instance count must be >= 1")

    @classmethod
    def from_jsonable(cls, obj: dict) -> "EventInstance":
        return cls(
            surface=obj["surface"],
            matched=bool(obj["matched"]),
            count=int(obj.get("count", 1)),
            suggested_args=[(a["role"], a["name"]) for a in obj.get("suggested_args", [])],
        )

    def to_jsonable(self) -> dict:
        out = {
            "surface": self.surface,
            "matched": self.matched,
            "count": self.count,
            "suggested_args": [{"role": r, "name": n} for r, n in self.suggested_args],
        }
        if self.matched_event is not None:
            out["matched_event"] = self.matched_event
        return out


def load_instances(data: bytes | str) -> list[EventInstance]:
    rows = json.loads(data)
    if not isinstance(rows, list):
        raise ValueError("instance file must be a JSON array")
    return [EventInstance.from_jsonable(row) for row in rows]


def load_instances_file(path: str | Path) -> list[EventInstance]:
    return load_instances(Path(path).read_text(encoding="utf-8"))


class Stoplist:
    """Lowercase lemma set used to drop fine-grained unmatched events."""

    def __init__(self, lemmas: Iterable[str] = DEFAULT_STOPLIST):
        self.lemmas = {lemma.lower() for lemma in lemmas}

    @classmethod
    def from_file(cls, path: str | Path) -> "Stoplist":
        lemmas = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            word = line.split("#", 1)[0].strip().lower()
            if word:
                lemmas.append(word)
        return cls(lemmas)

    def __contains__(self, lemma: str) -> bool:
        return lemma.lower() in self.lemmas


def _lemma_candidates(token: str) -> set[str]:
    """Rule-based guesses at an English lemma (heuristic, no NLP stack)."""
    out = {token}
    if token.endswith("ies") and len(token) > 4:
        out.add(token[:-3] + "y")
    if token.endswith("es") and len(token) > 3:
        out.add(token[:-2])
    if token.endswith("s") and not token.endswith("ss") and len(token) > 2:
        out.add(token[:-1])
    if token.endswith("ing") and len(token) >= 5:
        base = token[:-3]
        out.update({base, base + "e"})
        if len(base) > 2 and base[-1] == base[-2]:
            out.add(base[:-1])
    if token.endswith("ed") and len(token) >= 4:
        base = token[:-2]
        out.update({base, base + "e"})
        if len(base) > 2 and base[-1] == base[-2]:
            out.add(base[:-1])
    return out


def filter_fine_grained(
    instances: list[EventInstance], stoplist: Optional[Stoplist] = None
) -> list[EventInstance]:
    """Drop unmatched instances whose surface (or single-token lemma) is
    stoplisted. Matched instances always survive."""
    stoplist = stoplist if stoplist is not None else Stoplist()
    kept = []
    for inst in instances:
        if not inst.matched:
            surface = inst.surface.lower().strip()
            hits = surface in stoplist
            tokens = surface.split()
            if not hits and len(tokens) == 1:
                hits = any(lemma in stoplist for lemma in _lemma_candidates(tokens[0]))
            if hits:
                continue
        kept.append(inst)
    return kept


class TextEncoder:
    """Interface: map text to a comparable representation (token set or vector)."""

    def encode(self, text: str):
        raise NotImplementedError


class TokenSetEncoder(TextEncoder):
    def encode(self, text: str) -> frozenset[str]:
        return frozenset(text.lower().split())


def similarity(repr_a, repr_b) -> float:
    """Similarity of two encoded texts: Jaccard for sets, cosine for vectors."""
    if isinstance(repr_a, (set, frozenset)) and isinstance(repr_b, (set, frozenset)):
        if not repr_a and not repr_b:
            return 1.0
        union = len(repr_a | repr_b)
        return len(repr_a & repr_b) / union if union else 1.0
    dot = sum(a * b for a, b in zip(repr_a, repr_b))
    norm_a = sum(a * a for a in repr_a) ** 0.5
    norm_b = sum(b * b for b in repr_b) ** 0.5
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return dot / (norm_a * norm_b)


@dataclass
class MatcherConfig:
    similarity_threshold: float = 0.7
    encoder: TextEncoder = field(default_factory=TokenSetEncoder)
    include_descriptions: bool = False

    def __post_init__(self):
        if not 0.0 <= self.similarity_threshold <= 1.0:
            raise ValueError("similarity_threshold must lie in [0, 1]")


def rematch(
    instances: list[EventInstance],
    schema: SchemaDocument,
    config: Optional[MatcherConfig] = None,
) -> tuple[list[EventInstance], list[EventInstance]]:
    """Partition the unmatched instances into (recovered, still unmatched).

    An instance is recovered iff its best similarity against the schema's
    primitive event names reaches the threshold; the winning event id is
    recorded on the instance. Matched inputs pass through untouched (they are
    in neither output list).
    """
    config = config or MatcherConfig()
    targets: list[tuple[str, str]] = []
    for ev in schema.events:
        if ev.is_gate or ev.is_chapter:
            continue
        targets.append((ev.id, ev.name))
        if config.include_descriptions and ev.description:
            targets.append((ev.id, ev.description))
    encoded_targets = [(eid, config.encoder.encode(text)) for eid, text in targets]

    recovered: list[EventInstance] = []
    still: list[EventInstance] = []
    for inst in instances:
        if inst.matched:
            continue
        encoded = config.encoder.encode(inst.surface)
        best_id, best_score = None, -1.0
        for eid, target_repr in encoded_targets:
            score = similarity(encoded, target_repr)
            if score > best_score:
                best_id, best_score = eid, score
        if best_id is not None and best_score >= config.similarity_threshold:
            inst.matched_event = best_id
            recovered.append(inst)
        else:
            still.append(inst)
    return recovered, still


def rank_unmatched(instances: list[EventInstance]) -> list[EventInstance]:
    """Merge equal surfaces (summing counts) and sort by count desc, surface asc."""
    merged: dict[str, EventInstance] = {}
    for inst in instances:
        if inst.surface in merged:
            keep = merged[inst.surface]
            keep.count += inst.count
            for arg in inst.suggested_args:
                if arg not in keep.suggested_args:
                    keep.suggested_args.append(arg)
        else:
            merged[inst.surface] = EventInstance(
                surface=inst.surface,
                matched=inst.matched,
                count=inst.count,
                suggested_args=list(inst.suggested_args),
            )
    return sorted(merged.values(), key=lambda i: (-i.count, i.surface))


def _pct_increase(curated: int, induced: int) -> int:
    """round(curated / induced * 100), half away from zero; 0 when induced = 0."""
    if induced == 0:
        return 0
    return (200 * curated + induced) // (2 * induced)


@dataclass
class CoverageStats:
    induced_events: int = 0
    curated_events: int = 0
    induced_participants: int = 0
    curated_participants: int = 0

    @property
    def total_events(self) -> int:
        return self.induced_events + self.curated_events

    @property
    def total_participants(self) -> int:
        return self.induced_participants + self.curated_participants

    @property
    def increase_pct_events(self) -> int:
        return _pct_increase(self.curated_events, self.induced_events)

    @property
    def increase_pct_participants(self) -> int:
        return _pct_increase(self.curated_participants, self.induced_participants)

    def add(self, other: "CoverageStats") -> "CoverageStats":
        return CoverageStats(
            self.induced_events + other.induced_events,
            self.curated_events + other.curated_events,
            self.induced_participants + other.induced_participants,
            self.curated_participants + other.curated_participants,
        )

    def to_jsonable(self) -> dict:
        return {
            "induced_events": self.induced_events,
            "curated_events": self.curated_events,
            "induced_participants": self.induced_participants,
            "curated_participants": self.curated_participants,
            "total_events": self.total_events,
            "total_participants": self.total_participants,
            "increase_pct_events": self.increase_pct_events,
            "increase_pct_participants": self.increase_pct_participants,
        }


def coverage_stats(library: list[SchemaDocument]) -> CoverageStats:
    """Count events and participants by provenance across a schema library."""
    stats = CoverageStats()
    for doc in library:
        for ev in doc.events:
            tag = doc.provenance_index.get(ev.id)
            if tag == PROVENANCE_INDUCED:
                stats.induced_events += 1
            elif tag == PROVENANCE_CURATED:
                stats.curated_events += 1
            else:
                raise MissingProvenance(ev.id)
            for part in ev.participants:
                tag = doc.provenance_index.get(part.id)
                if tag == PROVENANCE_INDUCED:
                    stats.induced_participants += 1
                elif tag == PROVENANCE_CURATED:
                    stats.curated_participants += 1
                else:
                    raise MissingProvenance(part.id)
    return stats


def build_worklist(ranked: list[EventInstance]) -> list[dict]:
    """Project ranked unmatched instances into worklist entries."""
    return [
        {
            "surface": inst.surface,
            "count": inst.count,
            "suggested_args": [{"role": r, "name": n} for r, n in inst.suggested_args],
            "rank": position,
        }
        for position, inst in enumerate(ranked, start=1)
    ]


def dump_worklist(worklist: list[dict]) -> bytes:
    return (json.dumps(worklist, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def load_worklist(data: bytes | str) -> list[dict]:
    rows = json.loads(data)
    if not isinstance(rows, list):
        raise ValueError("worklist file must be a JSON array")
    return rows


def run_pipeline(
    instances: list[EventInstance],
    schema: SchemaDocument,
    config: Optional[MatcherConfig] = None,
    stoplist: Optional[Stoplist] = None,
) -> tuple[list[dict], list[EventInstance], list[EventInstance]]:
    """filter -> rematch -> rank -> worklist. Returns (worklist, recovered, still)."""
    filtered = filter_fine_grained(instances, stoplist)
    recovered, still = rematch(filtered, schema, config)
    ranked = rank_unmatched(still)
    return build_worklist(ranked), recovered, ranked
