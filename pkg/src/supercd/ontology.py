"""Concept taxonomy: a rooted DAG of subclass edges with per-concept corpus counts.

The graph answers the membership queries the rest of the pipeline is built on:
reflexive ancestor closure, shared-parent siblings, strict descendants, and the
"matches some included concept but not the excluded one" predicate.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import OntologyValidationError, UnknownConceptError


@dataclass(frozen=True)
class Concept:
    """A node in the taxonomy: one generalization of entity mentions."""

    id: str
    name: str
    corpus_frequency: int = 0


@dataclass(frozen=True)
class SuperpositionQuery:
    """One excluded concept plus the included concepts it is weighed against."""

    excluded: str
    included: tuple[str, ...]

    def __post_init__(self):
        included = tuple(self.included)
        object.__setattr__(self, "included", included)
        if not included:
            raise ValueError("query needs at least one included concept")
        if len(set(included)) != len(included):
            raise ValueError("duplicate concepts in included list")
        if self.excluded in included:
            raise ValueError(f"excluded concept {self.excluded!r} also listed as included")


@dataclass
class ValidationReport:
    """Outcome of an ontology invariant check."""

    ok: bool
    issues: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


class Ontology:
    """Immutable view of a concept DAG.

    Construction is permissive (``validate`` is the invariant checker); the
    query operations assume a validated graph. All reads are pure, so a single
    instance is safe to share across threads.
    """

    def __init__(self, concepts: Iterable[Concept], edges: Iterable[tuple[str, str]]):
        self._concept_list = list(concepts)
        self._edges = [(str(c), str(p)) for c, p in edges]
        self._concepts: dict[str, Concept] = {}
        for c in self._concept_list:
            self._concepts.setdefault(c.id, c)
        self._parents: dict[str, tuple[str, ...]] = {cid: () for cid in self._concepts}
        self._children: dict[str, tuple[str, ...]] = {cid: () for cid in self._concepts}
        par: dict[str, list[str]] = {cid: [] for cid in self._concepts}
        chi: dict[str, list[str]] = {cid: [] for cid in self._concepts}
        for child, parent in self._edges:
            if child in par and parent in chi:
                par[child].append(parent)
                chi[parent].append(child)
        for cid in self._concepts:
            self._parents[cid] = tuple(sorted(set(par[cid])))
            self._children[cid] = tuple(sorted(set(chi[cid])))
        self._ancestor_cache: dict[str, frozenset[str]] = {}

    # -- basic accessors ---------------------------------------------------

    def __len__(self) -> int:
        return len(self._concepts)

    def __contains__(self, concept_id: str) -> bool:
        return concept_id in self._concepts

    def ids(self) -> list[str]:
        return sorted(self._concepts)

    def concepts(self) -> Iterator[Concept]:
        for cid in sorted(self._concepts):
            yield self._concepts[cid]

    def edges(self) -> list[tuple[str, str]]:
        return sorted(set(self._edges))

    def concept(self, concept_id: str) -> Concept:
        try:
            return self._concepts[concept_id]
        except KeyError:
            raise UnknownConceptError(concept_id) from None

    def name(self, concept_id: str) -> str:
        return self.concept(concept_id).name

    def parents(self, concept_id: str) -> tuple[str, ...]:
        self.concept(concept_id)
        return self._parents[concept_id]

    def children(self, concept_id: str) -> tuple[str, ...]:
        self.concept(concept_id)
        return self._children[concept_id]

    def roots(self) -> list[str]:
        return sorted(cid for cid, ps in self._parents.items() if not ps)

    @property
    def root_id(self) -> str:
        roots = self.roots()
        if len(roots) != 1:
            raise OntologyValidationError(f"expected exactly one root, found {roots}")
        return roots[0]

    def with_frequencies(self, counts: dict[str, int]) -> "Ontology":
        """A copy of this graph with corpus_frequency replaced by ``counts``."""
        replaced = [
            Concept(c.id, c.name, int(counts.get(c.id, 0))) for c in self._concept_list
        ]
        return Ontology(replaced, self._edges)

    # -- graph queries -----------------------------------------------------

    def _ancestors_of(self, concept_id: str) -> frozenset[str]:
        cached = self._ancestor_cache.get(concept_id)
        if cached is not None:
            return cached
        seen = {concept_id}
        queue = deque([concept_id])
        while queue:
            cur = queue.popleft()
            for p in self._parents.get(cur, ()):
                if p not in seen:
                    seen.add(p)
                    queue.append(p)
        result = frozenset(seen)
        self._ancestor_cache[concept_id] = result
        return result

    def closure(self, direct_concepts: Iterable[str]) -> frozenset[str]:
        """Reflexive-transitive ancestor set of ``direct_concepts``."""
        out: set[str] = set()
        for cid in direct_concepts:
            self.concept(cid)
            out |= self._ancestors_of(cid)
        return frozenset(out)

    def siblings(self, concept_id: str) -> frozenset[str]:
        """Concepts sharing at least one parent with ``concept_id`` (itself excluded)."""
        self.concept(concept_id)
        out: set[str] = set()
        for p in self._parents[concept_id]:
            out.update(self._children[p])
        out.discard(concept_id)
        return frozenset(out)

    def descendants(self, concept_id: str) -> frozenset[str]:
        """Strict descendants of ``concept_id``."""
        self.concept(concept_id)
        seen: set[str] = set()
        queue = deque([concept_id])
        while queue:
            cur = queue.popleft()
            for ch in self._children.get(cur, ()):
                if ch not in seen:
                    seen.add(ch)
                    queue.append(ch)
        return frozenset(seen)

    def satisfies(self, direct_concepts: Iterable[str], query: SuperpositionQuery) -> bool:
        """True iff the closure hits some included concept and misses the excluded one."""
        self.concept(query.excluded)
        for cid in query.included:
            self.concept(cid)
        cl = self.closure(direct_concepts)
        if query.excluded in cl:
            return False
        return any(cid in cl for cid in query.included)

    # -- invariants ----------------------------------------------------------

    def validate(self) -> ValidationReport:
        """Check every structural invariant; collect violations instead of raising."""
        issues: list[str] = []

        seen_ids: set[str] = set()
        for c in self._concept_list:
            if c.id in seen_ids:
                issues.append(f"duplicate concept id: {c.id!r}")
            seen_ids.add(c.id)
            if not c.name:
                issues.append(f"concept {c.id!r} has an empty name")
            if c.corpus_frequency < 0:
                issues.append(f"concept {c.id!r} has negative corpus_frequency")

        for child, parent in self._edges:
            if child not in self._concepts:
                issues.append(f"dangling edge: child {child!r} is not a concept")
            if parent not in self._concepts:
                issues.append(f"dangling edge: parent {parent!r} is not a concept")

        cycle = self._find_cycle()
        if cycle:
            issues.append("cycle: " + " -> ".join(cycle))

        roots = self.roots()
        if len(roots) == 0 and self._concepts:
            issues.append("no root: every concept has a parent")
        elif len(roots) > 1:
            issues.append(f"multiple roots: {roots}")

        if len(roots) == 1 and not cycle:
            root = roots[0]
            for cid in self._concepts:
                if cid != root and root not in self._ancestors_of(cid):
                    issues.append(f"concept {cid!r} does not reach the root {root!r}")

        return ValidationReport(ok=not issues, issues=issues)

    def _find_cycle(self) -> list[str] | None:
        # Iterative DFS over child->parent edges, white/grey/black coloring.
        WHITE, GREY, BLACK = 0, 1, 2
        color = {cid: WHITE for cid in self._concepts}
        for start in sorted(self._concepts):
            if color[start] != WHITE:
                continue
            stack: list[tuple[str, int]] = [(start, 0)]
            path = [start]
            color[start] = GREY
            while stack:
                node, idx = stack[-1]
                parents = self._parents.get(node, ())
                if idx < len(parents):
                    stack[-1] = (node, idx + 1)
                    nxt = parents[idx]
                    if nxt not in color:
                        continue
                    if color[nxt] == GREY:
                        at = path.index(nxt)
                        return path[at:] + [nxt]
                    if color[nxt] == WHITE:
                        color[nxt] = GREY
                        stack.append((nxt, 0))
                        path.append(nxt)
                else:
                    color[node] = BLACK
                    stack.pop()
                    path.pop()
        return None


# -- module-level aliases matching the operation vocabulary -------------------


def closure(ontology: Ontology, direct_concepts: Iterable[str]) -> frozenset[str]:
    return ontology.closure(direct_concepts)


def siblings(ontology: Ontology, concept_id: str) -> frozenset[str]:
    return ontology.siblings(concept_id)


def descendants(ontology: Ontology, concept_id: str) -> frozenset[str]:
    return ontology.descendants(concept_id)


def satisfies(ontology: Ontology, direct_concepts: Iterable[str], query: SuperpositionQuery) -> bool:
    return ontology.satisfies(direct_concepts, query)


def validate(ontology: Ontology) -> ValidationReport:
    return ontology.validate()


# -- persistence ---------------------------------------------------------------


def save_ontology(ontology: Ontology, path: str | Path) -> None:
    """Write JSONL: one concept record per concept, then one record per edge."""
    path = Path(path)
    lines = []
    for c in ontology.concepts():
        lines.append(
            json.dumps(
                {"kind": "concept", "id": c.id, "name": c.name, "freq": c.corpus_frequency},
                ensure_ascii=False,
            )
        )
    for child, parent in ontology.edges():
        lines.append(json.dumps({"kind": "edge", "child": child, "parent": parent}, ensure_ascii=False))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_ontology(path: str | Path) -> Ontology:
    path = Path(path)
    concepts: list[Concept] = []
    edges: list[tuple[str, str]] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            kind = rec.get("kind")
            if kind == "concept":
                concepts.append(Concept(rec["id"], rec["name"], int(rec.get("freq", 0))))
            elif kind == "edge":
                edges.append((rec["child"], rec["parent"]))
            else:
                raise OntologyValidationError(f"{path}:{lineno}: unknown record kind {kind!r}")
    return Ontology(concepts, edges)
