"""Budgeted active-learning session: extract, query, retrieve, annotate.

One session handles one target type. The pipeline stages are pure given their
seeds, so a session is replayable from its trace; the only side-effecting
stage, annotation, is either the exact ontology oracle or deferred to an
external (human) queue that the service layer drains.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InsufficientConceptsError, ParameterError
from .extractor import ExtractorConfig, common_concepts, extract
from .ontology import Ontology, SuperpositionQuery
from .sir import RetrieverModel, encode, encode_pool
from .superposition import (
    build_queries,
    build_sets,
    order_queries,
    serialize_query,
    tokenize_query,
)
from .synth import Instance, TaskSplit

_STREAM_FALLBACK = 61


@dataclass(frozen=True)
class SessionConfig:
    """Budget and pipeline knobs for one active-learning session."""

    budget: int
    annotator: str = "oracle"
    tau: float = 0.5
    m_cap: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.budget < 0:
            raise ParameterError("budget must be >= 0")
        if self.annotator not in ("oracle", "human"):
            raise ParameterError(f"unknown annotator: {self.annotator!r}")


@dataclass
class SessionComponents:
    """Trained or configured pieces a session runs on."""

    ontology: Ontology
    retriever: RetrieverModel
    extractor: ExtractorConfig = ExtractorConfig()


@dataclass(frozen=True)
class AnnotationRecord:
    """One annotated sentence: a decision for every mention it contains."""

    instance_id: str
    decisions: dict[str, bool]
    annotator: str
    timestamp: float


@dataclass(frozen=True)
class SelectionPick:
    """Trace entry: which query claimed which instance at what score."""

    query_excluded: str
    instance_id: str
    score: float


@dataclass
class SessionResult:
    """Everything a finished (or awaiting-annotation) session produced."""

    selected: list[str]
    records: list[AnnotationRecord]
    pending: list[str]
    augmented_ids: list[str]
    trace: dict = field(default_factory=dict)


def select_with_trace(
    ordered_queries: Sequence[SuperpositionQuery],
    model: RetrieverModel,
    pool: Sequence[Instance],
    budget: int,
    ontology: Ontology,
) -> list[SelectionPick]:
    """Greedy budgeted selection over the ordered queries.

    More queries than budget: the first ``budget`` queries take one instance
    each. Otherwise round-robin, each turn giving the current query its
    highest-scoring not-yet-selected instance (ties by instance id), until
    the budget is spent or the pool runs dry.
    """
    if budget < 0:
        raise ParameterError("budget must be >= 0")
    if budget == 0 or not ordered_queries or not pool:
        return []

    encodings = encode_pool(model, pool)
    active = list(ordered_queries)
    one_shot = len(active) > budget
    if one_shot:
        active = active[:budget]
    score_vectors = []
    rankings: list[list[int]] = []
    for query in active:
        q_vec = encode(model, tokenize_query(serialize_query(query, ontology)))
        scores = encodings @ q_vec
        score_vectors.append(scores)
        rankings.append(sorted(range(len(pool)), key=lambda i: (-scores[i], pool[i].id)))

    picks: list[SelectionPick] = []
    taken: set[int] = set()
    pointers = [0] * len(active)
    turn = 0
    while len(picks) < budget and len(taken) < len(pool):
        if one_shot and turn >= len(active):
            break
        qi = turn % len(active)
        order = rankings[qi]
        ptr = pointers[qi]
        while ptr < len(order) and order[ptr] in taken:
            ptr += 1
        pointers[qi] = ptr
        if ptr < len(order):
            idx = order[ptr]
            taken.add(idx)
            picks.append(
                SelectionPick(
                    query_excluded=active[qi].excluded,
                    instance_id=pool[idx].id,
                    score=float(score_vectors[qi][idx]),
                )
            )
        turn += 1
    return picks


def select_candidates(
    ordered_queries: Sequence[SuperpositionQuery],
    model: RetrieverModel,
    pool: Sequence[Instance],
    budget: int,
    ontology: Ontology,
) -> list[str]:
    """Selected instance ids in selection order (see select_with_trace)."""
    return [p.instance_id for p in select_with_trace(ordered_queries, model, pool, budget, ontology)]


def annotate_oracle(
    instance: Instance, target_concepts: Sequence[str], ontology: Ontology
) -> AnnotationRecord:
    """Label every mention by exact ontology membership in the target set.

    The timestamp is pinned to 0.0: oracle runs must be byte-reproducible.
    """
    targets = frozenset(target_concepts)
    decisions = {
        m.key(instance.id): bool(ontology.closure(m.direct_concepts) & targets)
        for m in instance.mentions
    }
    return AnnotationRecord(
        instance_id=instance.id, decisions=decisions, annotator="oracle", timestamp=0.0
    )


def augmented_training_set(
    split: TaskSplit, records: Sequence[AnnotationRecord]
) -> list[tuple[np.ndarray, bool]]:
    """Labeled (feature, is_target) mentions: illustrative plus annotated."""
    labeled: list[tuple[np.ndarray, bool]] = []
    for inst in split.illustrative:
        for m in inst.mentions:
            labeled.append((m.feature, split.labels[m.key(inst.id)]))
    by_id = {inst.id: inst for inst in split.pool}
    for rec in records:
        inst = by_id.get(rec.instance_id)
        if inst is None:
            continue
        for m in inst.mentions:
            labeled.append((m.feature, rec.decisions[m.key(inst.id)]))
    return labeled


def run_session(
    task_split: TaskSplit,
    config: SessionConfig,
    components: SessionComponents,
) -> SessionResult:
    """Run one session end to end (through annotation if the oracle is used).

    Concept extraction covers the target-positive mentions of each
    illustrative instance; the ontology root is dropped from the outputs
    because a universal ancestor can neither discriminate nor be eliminated.
    If fewer than two common concepts survive, selection falls back to a
    seeded uniform draw from the pool, recorded in the trace.
    """
    ontology = components.ontology
    targets = frozenset(task_split.target_concepts)
    root = ontology.root_id

    ce_outputs: list[list[str]] = []
    ce_trace: dict[str, list[str]] = {}
    for inst in task_split.illustrative:
        concepts: set[str] = set()
        for m in inst.mentions:
            if task_split.labels.get(m.key(inst.id), False):
                concepts.update(extract(inst, m, ontology, components.extractor))
        concepts.discard(root)
        output = sorted(concepts)
        ce_outputs.append(output)
        ce_trace[inst.id] = output

    common = common_concepts(ce_outputs, ontology, config.tau, config.m_cap)

    fallback = False
    ordered: list[SuperpositionQuery] = []
    sets: list[tuple[str, str]] = []
    try:
        sets = build_sets(common)
        ordered = order_queries(build_queries(sets), common)
    except InsufficientConceptsError:
        fallback = True

    if fallback:
        rng = np.random.default_rng([config.seed, _STREAM_FALLBACK])
        n = min(config.budget, len(task_split.pool))
        chosen = rng.choice(len(task_split.pool), size=n, replace=False)
        picks = [
            SelectionPick(query_excluded="", instance_id=task_split.pool[int(i)].id, score=0.0)
            for i in chosen
        ]
    else:
        picks = select_with_trace(
            ordered, components.retriever, task_split.pool, config.budget, ontology
        )
    selected = [p.instance_id for p in picks]

    records: list[AnnotationRecord] = []
    pending: list[str] = []
    if config.annotator == "oracle":
        by_id = {inst.id: inst for inst in task_split.pool}
        records = [annotate_oracle(by_id[iid], sorted(targets), ontology) for iid in selected]
    else:
        pending = list(selected)

    augmented_ids = [inst.id for inst in task_split.illustrative] + [
        rec.instance_id for rec in records
    ]
    trace = {
        "ce_outputs": ce_trace,
        "common": {
            "concepts": list(common.concepts),
            "counts": dict(common.counts),
            "frequencies": dict(common.frequencies),
        },
        "sets": [[a, b] for a, b in sets],
        "ordered_queries": [serialize_query(q, ontology) for q in ordered],
        "picks": [
            {"query_excluded": p.query_excluded, "instance": p.instance_id, "score": p.score}
            for p in picks
        ],
        "fallback": fallback,
    }
    return SessionResult(
        selected=selected,
        records=records,
        pending=pending,
        augmented_ids=augmented_ids,
        trace=trace,
    )
