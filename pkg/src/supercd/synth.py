"""Seeded generators for ontologies, corpora, and few-shot typing tasks.

Everything here is engineered to surface the generalization ambiguity the rest
of the pipeline resolves: mentions carry leaf concepts, sentences carry
signature tokens for the whole concept closure, and task sampling can skew the
illustrative shots toward one narrow sub-concept so the true type boundary is
underdetermined.

Token classes are kept disjoint on purpose: concept display names never occur
as sentence tokens, so a retriever with untrained (random) embeddings has no
lexical shortcut from query to text. Signature tokens carry that signal and it
must be learned.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, OntologyValidationError, ParameterError
from .ontology import Concept, Ontology

_FILLERS = (
    "the", "a", "of", "and", "in", "to", "was", "is", "near", "for",
    "with", "on", "by", "at", "from", "after", "before", "over",
)

# Every sentence is filler-padded to this many tokens (longer ones are kept
# as generated). Mean-pooled retrieval divides by token count, so equal
# lengths keep sentence scores on one scale.
_SENTENCE_LENGTH = 32

_SYLLABLES = (
    "ba", "de", "fi", "go", "hu", "ka", "lo", "mi", "nu", "po",
    "ra", "su", "ta", "vo", "wi", "ze",
)

# Independent RNG stream tags, so adding draws to one stage never shifts another.
_STREAM_ONTOLOGY = 11
_STREAM_LATENTS = 21
_STREAM_SENTENCES = 22
_STREAM_TASK = 31


@dataclass(eq=False)
class Mention:
    """A candidate entity span inside one sentence."""

    span: tuple[int, int]
    direct_concepts: frozenset[str]
    feature: np.ndarray

    def key(self, instance_id: str) -> str:
        return mention_key(instance_id, self.span)


@dataclass
class Instance:
    """One sentence: lowercase tokens plus its annotated mentions."""

    id: str
    tokens: list[str]
    mentions: list[Mention]


@dataclass(frozen=True)
class TaskSpec:
    """What to learn: a target concept set and how the K shots are drawn.

    ``skew`` is the probability that each illustrative positive is drawn from
    ``illustrative_source`` rather than from anywhere inside the target set;
    skew=1 reproduces the narrow-shots condition where the learner has never
    seen most target sub-concepts.
    """

    target_concepts: frozenset[str]
    illustrative_source: str
    k: int
    skew: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "target_concepts", frozenset(self.target_concepts))
        if self.k < 1:
            raise ParameterError("k must be >= 1")
        if not 0.0 <= self.skew <= 1.0:
            raise ParameterError("skew must lie in [0, 1]")
        if not self.target_concepts:
            raise ParameterError("target_concepts must be non-empty")


@dataclass
class TaskSplit:
    """Disjoint illustrative / pool / test instances plus gold span labels.

    ``labels`` covers every mention of the illustrative and test instances,
    keyed by ``mention_key``; pool instances are deliberately unlabeled.
    """

    target_concepts: tuple[str, ...]
    illustrative: list[Instance]
    pool: list[Instance]
    test: list[Instance]
    labels: dict[str, bool] = field(default_factory=dict)


def mention_key(instance_id: str, span: tuple[int, int]) -> str:
    return f"{instance_id}:{span[0]}:{span[1]}"


# -- ontology generation -------------------------------------------------------


def gen_ontology(
    n_concepts: int,
    depth: int,
    branching_range: tuple[int, int],
    extra_parent_prob: float,
    seed: int,
) -> Ontology:
    """Generate a rooted concept DAG with exactly ``n_concepts`` nodes.

    Nodes are laid out level by level under a single root; every node takes a
    primary parent one level up, which bounds the longest root path by
    ``depth`` and guarantees root reachability. With probability
    ``extra_parent_prob`` a node gains a second parent from any strictly
    shallower level, which keeps the graph acyclic while producing the
    multi-parent diamonds the sibling/closure logic must handle.
    """
    bmin, bmax = int(branching_range[0]), int(branching_range[1])
    if depth < 2:
        raise ParameterError(f"depth must be >= 2, got {depth}")
    if n_concepts < depth:
        raise ParameterError(f"n_concepts ({n_concepts}) must be >= depth ({depth})")
    if not 1 <= bmin <= bmax:
        raise ParameterError(f"branching range must satisfy 1 <= min <= max, got {branching_range}")
    if not 0.0 <= extra_parent_prob <= 1.0:
        raise ParameterError("extra_parent_prob must lie in [0, 1]")
    capacity = sum(bmax**level for level in range(1, depth + 1))
    if n_concepts - 1 > capacity:
        raise ParameterError(
            f"branching max {bmax} over depth {depth} caps at {capacity + 1} concepts, "
            f"cannot reach {n_concepts}"
        )

    rng = np.random.default_rng([seed, _STREAM_ONTOLOGY])

    # Level sizes: each level stays small enough to hang off the previous one
    # (<= prev * bmax) and large enough that the remaining levels can still
    # absorb everything left.
    sizes = [1]
    remaining = n_concepts - 1
    for level in range(1, depth + 1):
        if remaining == 0:
            break
        if level == depth:
            size = remaining
        else:
            future_per_node = sum(bmax**j for j in range(1, depth - level + 1))
            lo = max(1, -(-remaining // (1 + future_per_node)))
            hi = min(remaining, sizes[-1] * bmax)
            draw = sizes[-1] * int(rng.integers(bmin, bmax + 1))
            size = min(max(draw, lo), hi)
        sizes.append(size)
        remaining -= size

    width = max(4, len(str(n_concepts - 1)))
    ids_by_level: list[list[str]] = []
    concepts: list[Concept] = []
    edges: list[tuple[str, str]] = []
    counter = 0
    for level, size in enumerate(sizes):
        level_ids: list[str] = []
        for _ in range(size):
            cid = f"c{counter:0{width}d}"
            syl = rng.choice(len(_SYLLABLES), size=3)
            name = "".join(_SYLLABLES[int(s)] for s in syl) + str(counter)
            concepts.append(Concept(cid, name, 0))
            level_ids.append(cid)
            if level > 0:
                prev = ids_by_level[level - 1]
                primary = prev[int(rng.integers(len(prev)))]
                edges.append((cid, primary))
                shallower = [x for lv in ids_by_level for x in lv if x != primary]
                if shallower and rng.random() < extra_parent_prob:
                    extra = shallower[int(rng.integers(len(shallower)))]
                    edges.append((cid, extra))
            counter += 1
        ids_by_level.append(level_ids)

    return Ontology(concepts, edges)


# -- corpus generation ---------------------------------------------------------


def leaf_ranking(ontology: Ontology) -> list[str]:
    """Leaf concept ids in frequency-rank order (rank 1 first)."""
    return [cid for cid in ontology.ids() if not ontology.children(cid)]


def _zipf_cumulative(n: int, s: float) -> np.ndarray:
    weights = 1.0 / np.arange(1, n + 1, dtype=np.float64) ** s
    weights /= weights.sum()
    return np.cumsum(weights)


def _surface_variants(leaf: str) -> tuple[tuple[str, ...], ...]:
    # Two single-token surfaces and one two-token surface per leaf, so span
    # lengths vary without overlapping.
    return (
        (f"ent-{leaf}-0",),
        (f"ent-{leaf}-1",),
        (f"ent-{leaf}-2a", f"ent-{leaf}-2b"),
    )


def gen_corpus(
    ontology: Ontology,
    n_sentences: int,
    zipf_s: float,
    signature_tokens_per_concept: int,
    noise_sigma: float,
    d_f: int,
    seed: int,
) -> tuple[list[Instance], Ontology]:
    """Generate sentences with 1-2 concept-bearing mentions each.

    Mention leaves follow a Zipf(``zipf_s``) law over ``leaf_ranking`` order,
    giving the long-tailed concept distribution. Each mention contributes its
    surface tokens (the span) followed by one signature token per closure
    concept; fillers pad between. Features are the L2-normalized sum of fixed
    per-concept latent vectors plus clamped Gaussian noise, so closure overlap
    shows up as feature similarity.

    Returns the instances together with an ontology view whose
    corpus_frequency counts, per concept, the mentions whose closure contains
    it.
    """
    report = ontology.validate()
    if not report.ok:
        raise OntologyValidationError("; ".join(report.issues))
    if n_sentences < 1:
        raise ParameterError("n_sentences must be >= 1")
    if zipf_s <= 0:
        raise ParameterError("zipf_s must be > 0")
    if signature_tokens_per_concept < 1:
        raise ParameterError("signature_tokens_per_concept must be >= 1")
    if d_f < 1:
        raise ParameterError("d_f must be >= 1")
    if noise_sigma < 0:
        raise ParameterError("noise_sigma must be >= 0")

    leaves = leaf_ranking(ontology)
    cumulative = _zipf_cumulative(len(leaves), zipf_s)
    surfaces = {leaf: _surface_variants(leaf) for leaf in leaves}
    closures = {leaf: tuple(sorted(ontology.closure([leaf]))) for leaf in leaves}

    latent_rng = np.random.default_rng([seed, _STREAM_LATENTS])
    latents = {cid: latent_rng.standard_normal(d_f) for cid in ontology.ids()}

    rng = np.random.default_rng([seed, _STREAM_SENTENCES])
    clamp = 3.0 * noise_sigma
    instances: list[Instance] = []
    counts: dict[str, int] = {cid: 0 for cid in ontology.ids()}
    for i in range(n_sentences):
        tokens: list[str] = []
        mentions: list[Mention] = []
        # Two-mention sentences dominate so that few-shot training sets carry
        # co-mentioned negatives; single-mention sentences still occur.
        n_mentions = 2 if rng.random() < 0.8 else 1
        for _ in range(n_mentions):
            for _ in range(int(rng.integers(1, 4))):
                tokens.append(_FILLERS[int(rng.integers(len(_FILLERS)))])
            leaf = leaves[int(np.searchsorted(cumulative, rng.random(), side="right"))]
            surface = surfaces[leaf][int(rng.integers(3))]
            start = len(tokens)
            tokens.extend(surface)
            end = len(tokens)
            closure = closures[leaf]
            for cid in closure:
                variant = int(rng.integers(signature_tokens_per_concept))
                tokens.append(f"sig-{cid}-{variant}")
                counts[cid] += 1
            vec = np.zeros(d_f, dtype=np.float64)
            for cid in closure:
                vec += latents[cid]
            noise = rng.standard_normal(d_f) * noise_sigma
            if clamp > 0:
                np.clip(noise, -clamp, clamp, out=noise)
            vec += noise
            norm = float(np.linalg.norm(vec))
            if norm > 0:
                vec /= norm
            mentions.append(Mention((start, end), frozenset([leaf]), vec))
        # Pad to a fixed length: mean pooling divides by token count, so
        # unequal lengths would hand short sentences a score advantage
        # unrelated to their content.
        while len(tokens) < _SENTENCE_LENGTH:
            tokens.append(_FILLERS[int(rng.integers(len(_FILLERS)))])
        instances.append(Instance(f"s{i:06d}", tokens, mentions))

    return instances, ontology.with_frequencies(counts)


# -- task sampling ---------------------------------------------------------------


def gen_task(
    corpus: Sequence[Instance],
    ontology: Ontology,
    task_spec: TaskSpec,
    pool_fraction: float,
    seed: int,
) -> TaskSplit:
    """Split the corpus into K illustrative shots, an unlabeled pool, and a test set.

    Each shot is an instance with at least one target-positive mention; with
    probability ``task_spec.skew`` it must specifically contain the
    illustrative source concept. Pool and test partition the remaining
    instances at ``pool_fraction``. Gold labels (closure intersects the target
    set) are attached for illustrative and test mentions only.
    """
    if not 0.0 < pool_fraction < 1.0:
        raise ParameterError("pool_fraction must lie strictly between 0 and 1")
    for cid in task_spec.target_concepts:
        ontology.concept(cid)
    source = task_spec.illustrative_source
    ontology.concept(source)
    reachable = set(task_spec.target_concepts)
    for cid in task_spec.target_concepts:
        reachable |= ontology.descendants(cid)
    if source not in reachable:
        raise ParameterError(
            f"illustrative_source {source!r} is outside the target subtree"
        )

    targets = frozenset(task_spec.target_concepts)
    source_pos: list[Instance] = []
    target_pos: list[Instance] = []
    for inst in corpus:
        closures = [ontology.closure(m.direct_concepts) for m in inst.mentions]
        if any(source in cl for cl in closures):
            source_pos.append(inst)
        if any(cl & targets for cl in closures):
            target_pos.append(inst)
    if len(source_pos) < task_spec.k:
        raise DataError(
            f"need {task_spec.k} instances containing {source!r}, corpus has {len(source_pos)}"
        )

    rng = np.random.default_rng([seed, _STREAM_TASK])
    chosen: dict[str, Instance] = {}
    for _ in range(task_spec.k):
        primary = source_pos if rng.random() < task_spec.skew else target_pos
        fallback = target_pos if primary is source_pos else source_pos
        candidates = [x for x in primary if x.id not in chosen]
        if not candidates:
            candidates = [x for x in fallback if x.id not in chosen]
        if not candidates:
            raise DataError(
                f"only {len(chosen)} distinct target-positive instances available, "
                f"need {task_spec.k}"
            )
        pick = candidates[int(rng.integers(len(candidates)))]
        chosen[pick.id] = pick

    illustrative = sorted(chosen.values(), key=lambda x: x.id)
    remainder = [inst for inst in corpus if inst.id not in chosen]
    order = rng.permutation(len(remainder))
    n_pool = int(round(pool_fraction * len(remainder)))
    pool_ids = {remainder[int(i)].id for i in order[:n_pool]}
    pool = [inst for inst in remainder if inst.id in pool_ids]
    test = [inst for inst in remainder if inst.id not in pool_ids]

    labels: dict[str, bool] = {}
    for inst in illustrative + test:
        for m in inst.mentions:
            positive = bool(ontology.closure(m.direct_concepts) & targets)
            labels[m.key(inst.id)] = positive

    return TaskSplit(
        target_concepts=tuple(sorted(targets)),
        illustrative=illustrative,
        pool=pool,
        test=test,
        labels=labels,
    )


def attach_frequencies(ontology: Ontology, corpus: Sequence[Instance]) -> Ontology:
    """Ontology view whose corpus_frequency counts closure membership.

    A concept's frequency is the number of corpus mentions whose closure
    contains it, matching what gen_corpus reports on the view it returns.
    """
    counts: dict[str, int] = {cid: 0 for cid in ontology.ids()}
    cache: dict[frozenset[str], frozenset[str]] = {}
    for inst in corpus:
        for m in inst.mentions:
            cl = cache.get(m.direct_concepts)
            if cl is None:
                cl = ontology.closure(m.direct_concepts)
                cache[m.direct_concepts] = cl
            for cid in cl:
                counts[cid] += 1
    return ontology.with_frequencies(counts)


# -- persistence -----------------------------------------------------------------


def save_corpus(instances: Iterable[Instance], path: str | Path) -> None:
    """Write instances as JSONL, one sentence per line."""
    path = Path(path)
    lines = []
    for inst in instances:
        rec = {
            "id": inst.id,
            "tokens": inst.tokens,
            "mentions": [
                {
                    "span": [m.span[0], m.span[1]],
                    "concepts": sorted(m.direct_concepts),
                    "feature": [float(x) for x in m.feature],
                }
                for m in inst.mentions
            ],
        }
        lines.append(json.dumps(rec, ensure_ascii=False))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_corpus(path: str | Path) -> list[Instance]:
    path = Path(path)
    instances: list[Instance] = []
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            mentions = [
                Mention(
                    (int(m["span"][0]), int(m["span"][1])),
                    frozenset(m["concepts"]),
                    np.asarray(m["feature"], dtype=np.float64),
                )
                for m in rec["mentions"]
            ]
            instances.append(Instance(rec["id"], list(rec["tokens"]), mentions))
    return instances


def task_to_dict(split: TaskSplit) -> dict:
    return {
        "target": list(split.target_concepts),
        "illustrative": [x.id for x in split.illustrative],
        "pool": [x.id for x in split.pool],
        "test": [x.id for x in split.test],
        "labels": {k: split.labels[k] for k in sorted(split.labels)},
    }


def save_task(split: TaskSplit, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(task_to_dict(split), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
        newline="\n",
    )


def load_task(path: str | Path, corpus: Sequence[Instance]) -> TaskSplit:
    """Rebuild a TaskSplit from its id-based JSON file plus the source corpus."""
    rec = json.loads(Path(path).read_text(encoding="utf-8"))
    by_id = {inst.id: inst for inst in corpus}
    missing = [
        iid
        for part in ("illustrative", "pool", "test")
        for iid in rec[part]
        if iid not in by_id
    ]
    if missing:
        raise DataError(f"task references instances absent from the corpus: {missing[:5]}")
    return TaskSplit(
        target_concepts=tuple(rec["target"]),
        illustrative=[by_id[i] for i in rec["illustrative"]],
        pool=[by_id[i] for i in rec["pool"]],
        test=[by_id[i] for i in rec["test"]],
        labels={k: bool(v) for k, v in rec["labels"].items()},
    )
