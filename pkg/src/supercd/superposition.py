"""Elimination-based superposition sets and the grouped retrieval queries.

Given the m common concepts, every ordered pair (keep A, exclude B) is a
candidate boundary probe; pairs sharing an excluded concept collapse into one
query "B | A1, A2, ...", read as "instances of any A that are not B".
"""

from __future__ import annotations

import re
from typing import Sequence

from .errors import InsufficientConceptsError
from .extractor import CommonConceptSet
from .ontology import Ontology, SuperpositionQuery


def build_sets(common: CommonConceptSet) -> list[tuple[str, str]]:
    """All ordered (a, not_b) pairs over the common concepts.

    Pair order follows the CommonConceptSet order: the kept concept index
    ascends first, the excluded index within it. m concepts yield m(m-1)
    pairs; fewer than two concepts cannot express an elimination, which the
    caller treats as the signal to fall back to random selection.
    """
    concepts = list(common.concepts)
    if len(concepts) < 2:
        raise InsufficientConceptsError(
            f"need at least 2 common concepts to build elimination pairs, got {len(concepts)}"
        )
    return [(a, b) for a in concepts for b in concepts if a != b]


def build_queries(sets: Sequence[tuple[str, str]]) -> list[SuperpositionQuery]:
    """Group elimination pairs by excluded concept into one query each.

    Included concepts keep their pair order; queries appear in order of each
    excluded concept's first appearance, so m concepts yield m queries with
    m-1 included concepts apiece.
    """
    grouped: dict[str, list[str]] = {}
    for a, not_b in sets:
        grouped.setdefault(not_b, []).append(a)
    return [
        SuperpositionQuery(excluded=not_b, included=tuple(included))
        for not_b, included in grouped.items()
    ]


def order_queries(
    queries: Sequence[SuperpositionQuery], common: CommonConceptSet
) -> list[SuperpositionQuery]:
    """Annotation order: most frequently excluded concepts first.

    Sort key is the excluded concept's appearance count over the extractor
    outputs (descending), then its snapshotted corpus frequency (descending),
    then id (ascending). Stable, so equal keys keep their input order, though
    the id tie-break makes full ties impossible for distinct concepts.
    """
    for q in queries:
        if q.excluded not in common.counts:
            raise InsufficientConceptsError(
                f"query excludes {q.excluded!r}, which is not a common concept"
            )
    return sorted(
        queries,
        key=lambda q: (
            -common.counts[q.excluded],
            -common.frequencies.get(q.excluded, 0),
            q.excluded,
        ),
    )


def serialize_query(query: SuperpositionQuery, ontology: Ontology) -> str:
    """Render a query as '<excluded name> | <inc1 name>, <inc2 name>, ...'."""
    excluded = ontology.name(query.excluded)
    included = ", ".join(ontology.name(cid) for cid in query.included)
    return f"{excluded} | {included}"


def tokenize_query(text: str) -> list[str]:
    """Lowercase and split on whitespace; '|' and ',' become standalone tokens."""
    spaced = re.sub(r"([|,])", r" \1 ", text)
    return spaced.lower().split()
