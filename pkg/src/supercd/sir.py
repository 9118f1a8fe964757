"""Superposition instance retriever.

A deliberately small dense retriever: one shared trainable embedding table,
mean pooling over tokens for both sentences and serialized queries, inner
product scoring, and an InfoNCE-style contrastive loss with an analytic
gradient. Retrieval is exact and exhaustive; there is no index.

Training data is mined from the corpus itself: for a mention, pick a target
concept in its closure, pick a sibling of that target that the mention is NOT
an instance of, and ask for "sibling | shared parent, ...". The mention's
sentence is then a guaranteed positive, sentences mentioning the sibling are
hard negatives, and random non-matching sentences are easy negatives.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DataError,
    EncodingError,
    NumericError,
    OntologyValidationError,
    ParameterError,
    ShapeMismatchError,
)
from .ontology import Ontology, SuperpositionQuery
from .superposition import serialize_query, tokenize_query
from .synth import Instance

UNK_TOKEN = "<unk>"

_STREAM_INIT = 51
_STREAM_DATASET = 52
_STREAM_TRAIN = 53


@dataclass
class RetrieverModel:
    """Token embedding table shared by the text and query encoders."""

    vocab: list[str]
    emb: np.ndarray  # (len(vocab), d)
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._index:
            self._index = {tok: i for i, tok in enumerate(self.vocab)}
        if UNK_TOKEN not in self._index:
            raise ParameterError(f"vocab must contain the {UNK_TOKEN!r} slot")
        for tok in ("|", ","):
            if tok not in self._index:
                raise ParameterError(f"vocab must contain the {tok!r} token")
        if self.emb.ndim != 2 or self.emb.shape[0] != len(self.vocab):
            raise ShapeMismatchError(
                f"embedding table shape {self.emb.shape} does not match vocab size {len(self.vocab)}"
            )
        if not np.all(np.isfinite(self.emb)):
            raise NumericError("embedding table contains non-finite entries")

    @property
    def d(self) -> int:
        return int(self.emb.shape[1])

    def token_rows(self, tokens: Sequence[str]) -> np.ndarray:
        unk = self._index[UNK_TOKEN]
        return np.array([self._index.get(t, unk) for t in tokens], dtype=np.intp)

    def copy(self) -> "RetrieverModel":
        return RetrieverModel(vocab=list(self.vocab), emb=self.emb.copy())


def build_vocab(corpus: Sequence[Instance], ontology: Ontology) -> list[str]:
    """All corpus tokens plus tokenized concept names and the special slots."""
    tokens: set[str] = set()
    for inst in corpus:
        tokens.update(inst.tokens)
    for concept in ontology.concepts():
        tokens.update(tokenize_query(concept.name))
    tokens.discard(UNK_TOKEN)
    tokens -= {"|", ","}
    return [UNK_TOKEN, "|", ","] + sorted(tokens)


def init_model(vocab: Sequence[str], d: int, seed: int, scale: float = 0.1) -> RetrieverModel:
    if d < 1:
        raise ParameterError("embedding dimension must be >= 1")
    rng = np.random.default_rng([seed, _STREAM_INIT])
    emb = rng.standard_normal((len(vocab), d)) * scale
    return RetrieverModel(vocab=list(vocab), emb=emb)


# -- encoding and scoring --------------------------------------------------------


def encode(model: RetrieverModel, tokens: Sequence[str]) -> np.ndarray:
    """Mean of the tokens' embedding rows; unknown tokens hit the unk slot."""
    if len(tokens) == 0:
        raise EncodingError("cannot encode an empty token sequence")
    rows = model.token_rows(tokens)
    return model.emb[rows].mean(axis=0)


def score(x_vec: np.ndarray, q_vec: np.ndarray) -> float:
    x = np.asarray(x_vec, dtype=np.float64)
    q = np.asarray(q_vec, dtype=np.float64)
    if x.shape != q.shape:
        raise ShapeMismatchError(f"score dimensions differ: {x.shape} vs {q.shape}")
    return float(np.dot(x, q))


def loss(s_pos: float, s_negs: Sequence[float]) -> float:
    """Contrastive loss -log(e^{s_pos} / (e^{s_pos} + sum e^{s_neg})).

    Max-subtraction keeps the exponentials in range; no negatives means the
    positive takes the whole softmax mass, so the loss is exactly zero.
    """
    scores = np.concatenate(([s_pos], np.asarray(list(s_negs), dtype=np.float64)))
    if not np.all(np.isfinite(scores)):
        raise NumericError("loss received non-finite scores")
    if len(scores) == 1:
        return 0.0
    m = float(np.max(scores))
    shifted = scores - m
    return float(np.log(np.sum(np.exp(shifted))) - shifted[0])


def _softmax_groups(scores: np.ndarray) -> np.ndarray:
    shifted = scores - np.max(scores)
    e = np.exp(shifted)
    return e / e.sum()


def _pair_gradient(
    model: RetrieverModel,
    q_rows: np.ndarray,
    seq_rows: list[np.ndarray],
) -> tuple[float, dict[int, np.ndarray]]:
    """Loss and sparse embedding gradient for one (query, pos, negs) group.

    seq_rows[0] is the positive. Backpropagates dL/ds_i = softmax(s)_i - [i=0]
    through the inner products and both mean poolings; only rows appearing in
    some sequence receive gradient mass.
    """
    emb = model.emb
    q_vec = emb[q_rows].mean(axis=0)
    encs = [emb[rows].mean(axis=0) for rows in seq_rows]
    scores = np.array([np.dot(x, q_vec) for x in encs])
    if not np.all(np.isfinite(scores)):
        raise NumericError("non-finite score during gradient computation")
    p = _softmax_groups(scores)
    g = p.copy()
    g[0] -= 1.0

    grad: dict[int, np.ndarray] = {}
    dq = np.zeros(emb.shape[1], dtype=np.float64)
    for gi, rows, x in zip(g, seq_rows, encs):
        dq += gi * x
        contrib = (gi / len(rows)) * q_vec
        for r in rows:
            r = int(r)
            acc = grad.get(r)
            if acc is None:
                grad[r] = contrib.copy()
            else:
                acc += contrib
    q_contrib = dq / len(q_rows)
    for r in q_rows:
        r = int(r)
        acc = grad.get(r)
        if acc is None:
            grad[r] = q_contrib.copy()
        else:
            acc += q_contrib

    pair_loss = loss(float(scores[0]), [float(s) for s in scores[1:]])
    return pair_loss, grad


def loss_gradient(
    q_tokens: Sequence[str],
    pos_tokens: Sequence[str],
    neg_token_lists: Sequence[Sequence[str]],
    model: RetrieverModel,
) -> tuple[float, np.ndarray]:
    """Loss and the full dense gradient over the embedding table."""
    if len(q_tokens) == 0 or len(pos_tokens) == 0 or any(len(t) == 0 for t in neg_token_lists):
        raise EncodingError("cannot encode an empty token sequence")
    q_rows = model.token_rows(q_tokens)
    seq_rows = [model.token_rows(pos_tokens)] + [model.token_rows(t) for t in neg_token_lists]
    pair_loss, sparse = _pair_gradient(model, q_rows, seq_rows)
    grad = np.zeros_like(model.emb)
    for r, vec in sparse.items():
        grad[r] += vec
    return pair_loss, grad


# -- training dataset --------------------------------------------------------------


@dataclass(frozen=True)
class TrainingPair:
    """One contrastive group: a query, its guaranteed positive, tagged negatives."""

    query: SuperpositionQuery
    positive: str
    negatives: tuple[tuple[str, str], ...]  # (instance id, "excl" | "rand")


@dataclass
class SirDataset:
    """Emitted training pairs plus how many attempts were skipped."""

    pairs: list[TrainingPair]
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


def _instance_satisfies(
    closures: Sequence[frozenset[str]], included: frozenset[str], excluded: str
) -> bool:
    return any(excluded not in cl and cl & included for cl in closures)


def build_dataset(
    ontology: Ontology,
    corpus: Sequence[Instance],
    n_pairs: int,
    n_neg_excluded: int,
    n_neg_random: int,
    max_included: int,
    seed: int,
) -> SirDataset:
    """Mine contrastive training pairs from the corpus.

    Per pair: sample a mention, a target concept from its closure, and an
    excluded sibling the mention is not an instance of (re-drawing the target
    up to 10 times). The included list starts with a shared parent of target
    and excluded (which makes the source sentence a certain positive) and is
    padded with draws from the excluded concept's strict ancestors and
    descendants. The root never enters a query: every mention is trivially an
    instance of it, so it can neither discriminate nor be eliminated.

    Attempts that cannot complete (no eligible sibling, or the corpus cannot
    fill both negative quotas) are skipped and counted, so fewer than
    ``n_pairs`` pairs may come back.
    """
    report = ontology.validate()
    if not report.ok:
        raise OntologyValidationError("; ".join(report.issues))
    if not corpus:
        raise DataError("corpus is empty")
    if n_pairs < 0 or n_neg_excluded < 1 or n_neg_random < 1 or max_included < 1:
        raise ParameterError(
            "need n_pairs >= 0, negative quotas >= 1, max_included >= 1"
        )

    root = ontology.root_id
    closure_cache: dict[frozenset[str], frozenset[str]] = {}

    def mention_closure(direct: frozenset[str]) -> frozenset[str]:
        cl = closure_cache.get(direct)
        if cl is None:
            cl = ontology.closure(direct)
            closure_cache[direct] = cl
        return cl

    inst_closures: list[list[frozenset[str]]] = [
        [mention_closure(m.direct_concepts) for m in inst.mentions] for inst in corpus
    ]
    containing: dict[str, list[int]] = {}
    for pos, closures in enumerate(inst_closures):
        seen: set[str] = set()
        for cl in closures:
            seen |= cl
        for cid in seen:
            containing.setdefault(cid, []).append(pos)

    # Concepts present in over half the corpus cannot discriminate anything;
    # keeping them out of parents and sampled included terms stops their name
    # tokens from dominating every query embedding.
    ambient = {c for c, spots in containing.items() if len(spots) * 2 > len(corpus)}

    depth_cache: dict[str, int] = {root: 0}

    def depth_of(cid: str) -> int:
        cached = depth_cache.get(cid)
        if cached is None:
            cached = 1 + max(depth_of(p) for p in ontology.parents(cid))
            depth_cache[cid] = cached
        return cached

    # Ancestors come first in the extras pool: an ancestor of the excluded
    # concept is present in the positive, so its name token learns attraction,
    # while a descendant term appears only in the hard negatives and would
    # teach the opposite.
    pool_cache: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {}

    def included_pool(e: str) -> tuple[tuple[str, ...], tuple[str, ...]]:
        cached = pool_cache.get(e)
        if cached is None:
            anc = (ontology.closure([e]) - {e, root}) - ambient
            desc = ontology.descendants(e) - ambient
            cached = (tuple(sorted(anc)), tuple(sorted(desc)))
            pool_cache[e] = cached
        return cached

    # Instances are sampled by first drawing a prospective shared parent
    # uniformly, then an instance under one of its children. A uniform
    # sentence draw would concentrate query traffic on the names of large
    # subtrees in proportion to their size, and the associations the
    # retriever learns scale with that traffic; sessions need the deep,
    # narrow names trained just as hard as the broad ones. Parents whose
    # childless children can carry the whole pair are preferred wholesale
    # (subtree-bearing names should stay out of the repulsion role wherever
    # the ontology allows it), and ambient concepts are barred from
    # parenting unless the corpus is so small that everything is ambient.
    def _parent_pools(barred: frozenset[str]) -> tuple[dict, dict]:
        strict: dict[str, list[str]] = {}
        loose: dict[str, list[str]] = {}
        for cid in ontology.ids():
            if cid == root or cid in barred:
                continue
            kids = [k for k in ontology.children(cid) if k in containing]
            childless = [k for k in kids if not ontology.children(k)]
            if len(childless) >= 2:
                strict[cid] = sorted(childless)
            elif len(kids) >= 2:
                loose[cid] = sorted(kids)
        return strict, loose

    strict_pool, loose_pool = _parent_pools(ambient)
    if not strict_pool and not loose_pool:
        ambient = frozenset()
        strict_pool, loose_pool = _parent_pools(ambient)
        pool_cache.clear()
    parent_children = strict_pool if strict_pool else loose_pool
    parent_keys = sorted(parent_children)
    if not parent_keys:
        raise DataError("no corpus-present concept has two corpus-present siblings")

    rng = np.random.default_rng([seed, _STREAM_DATASET])
    pairs: list[TrainingPair] = []
    skipped = 0
    n_inst = len(corpus)
    for _ in range(n_pairs):
        prospective = parent_keys[int(rng.integers(len(parent_keys)))]
        kids = parent_children[prospective]
        anchor = kids[int(rng.integers(len(kids)))]
        anchor_spots = containing[anchor]
        inst_pos = anchor_spots[int(rng.integers(len(anchor_spots)))]
        inst = corpus[inst_pos]
        closures = inst_closures[inst_pos]
        holders = [j for j, c in enumerate(closures) if anchor in c]
        cl = closures[holders[int(rng.integers(len(holders)))]]
        candidates = sorted(cl - {root})
        if not candidates:
            skipped += 1
            continue

        inst_union = frozenset().union(*closures)
        prospective_kids = set(kids)
        excluded = None
        target = None
        for _ in range(10):
            t = candidates[int(rng.integers(len(candidates)))]
            # Exclusion candidates are the drawn parent's other childless
            # children, absent from the whole sentence; other target draws
            # retry. Holding the pair to the pre-drawn parent keeps query
            # traffic uniform across parent names instead of proportional to
            # subtree size, the "leaf | its ancestors" queries have the same
            # shape sessions produce, and subtree-bearing names stay out of
            # the repulsion role their included role has to counteract. A
            # sibling carried by the sentence's other mention would put the
            # excluded signature in the positive and muddy that repulsion.
            if t not in prospective_kids:
                continue
            eligible = [s for s in kids if s != t and s not in inst_union]
            leaf_eligible = [s for s in eligible if not ontology.children(s)]
            if leaf_eligible:
                eligible = leaf_eligible
            if eligible:
                target = t
                # Popular siblings are excluded proportionally more often:
                # sessions eliminate the illustrative source, which skews
                # popular, so that is where discrimination pressure pays.
                weights = np.array(
                    [len(containing.get(s, ())) + 1 for s in eligible], dtype=np.float64
                )
                weights /= weights.sum()
                excluded = eligible[int(rng.choice(len(eligible), p=weights))]
                break
        if excluded is None or target is None:
            skipped += 1
            continue

        shared = sorted(
            (set(ontology.parents(target)) & set(ontology.parents(excluded)))
            - {root}
            - ambient
        )
        if not shared:
            # Only an ambient parent connects the two: any query built here
            # would hinge on a term that matches most of the corpus.
            skipped += 1
            continue
        # The deepest shared parent is the most specific, hence the most
        # informative included term the pair can guarantee.
        parent = max(shared, key=lambda c: (depth_of(c), c))
        anc_pool, desc_pool = included_pool(excluded)
        included = [parent]
        budget_left = max_included - 1
        for tier in (anc_pool, desc_pool):
            pool = [c for c in tier if c != parent and c not in included]
            take = min(budget_left, len(pool))
            if take > 0:
                picks = rng.choice(len(pool), size=take, replace=False)
                included.extend(pool[int(j)] for j in sorted(picks))
                budget_left -= take
            if budget_left == 0:
                break
        query = SuperpositionQuery(excluded=excluded, included=tuple(included))
        included_set = frozenset(included)

        negatives: list[tuple[str, str]] = []
        used = {inst.id}
        excl_candidates = containing.get(excluded, [])
        perm = rng.permutation(len(excl_candidates))
        for j in perm:
            cand_pos = excl_candidates[int(j)]
            cand = corpus[cand_pos]
            if cand.id in used:
                continue
            if not _instance_satisfies(inst_closures[cand_pos], included_set, excluded):
                negatives.append((cand.id, "excl"))
                used.add(cand.id)
                if sum(1 for _, k in negatives if k == "excl") >= n_neg_excluded:
                    break
        if sum(1 for _, k in negatives if k == "excl") < n_neg_excluded:
            skipped += 1
            continue

        found_rand = 0
        for _ in range(50 * n_neg_random):
            if found_rand >= n_neg_random:
                break
            cand_pos = int(rng.integers(n_inst))
            cand = corpus[cand_pos]
            if cand.id in used:
                continue
            if not _instance_satisfies(inst_closures[cand_pos], included_set, excluded):
                negatives.append((cand.id, "rand"))
                used.add(cand.id)
                found_rand += 1
        if found_rand < n_neg_random:
            skipped += 1
            continue

        pairs.append(TrainingPair(query=query, positive=inst.id, negatives=tuple(negatives)))

    if skipped:
        warnings.warn(f"build_dataset skipped {skipped} of {n_pairs} attempts", stacklevel=2)
    return SirDataset(pairs=pairs, skipped=skipped)


def save_dataset(dataset: SirDataset, path: str | Path) -> None:
    lines = []
    for pair in dataset.pairs:
        rec = {
            "query": {
                "excluded": pair.query.excluded,
                "included": list(pair.query.included),
            },
            "pos": pair.positive,
            "negs": [{"id": nid, "kind": kind} for nid, kind in pair.negatives],
        }
        lines.append(json.dumps(rec, ensure_ascii=False))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_dataset(path: str | Path) -> SirDataset:
    pairs: list[TrainingPair] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            pairs.append(
                TrainingPair(
                    query=SuperpositionQuery(
                        excluded=rec["query"]["excluded"],
                        included=tuple(rec["query"]["included"]),
                    ),
                    positive=rec["pos"],
                    negatives=tuple((n["id"], n["kind"]) for n in rec["negs"]),
                )
            )
    return SirDataset(pairs=pairs, skipped=0)


# -- training ------------------------------------------------------------------------


@dataclass
class TrainResult:
    model: RetrieverModel
    epoch_mean_loss: list[float]


def train(
    model_init: RetrieverModel,
    dataset: SirDataset,
    corpus: Sequence[Instance],
    ontology: Ontology,
    lr: float = 0.1,
    epochs: int = 5,
    seed: int = 0,
) -> TrainResult:
    """Plain SGD over contrastive groups, one TrainingPair per step.

    The pair order is reshuffled each epoch from the seed. The input model is
    never mutated; zero epochs returns an identical copy.
    """
    if len(dataset.pairs) == 0:
        raise DataError("training dataset is empty")
    if lr <= 0:
        raise ParameterError("lr must be > 0")

    model = model_init.copy()
    by_id = {inst.id: inst for inst in corpus}
    groups: list[tuple[np.ndarray, list[np.ndarray]]] = []
    for pair in dataset.pairs:
        text = serialize_query(pair.query, ontology)
        q_rows = model.token_rows(tokenize_query(text))
        ids = [pair.positive] + [nid for nid, _ in pair.negatives]
        seq_rows = []
        for iid in ids:
            inst = by_id.get(iid)
            if inst is None:
                raise DataError(f"dataset references instance {iid!r} absent from the corpus")
            seq_rows.append(model.token_rows(inst.tokens))
        groups.append((q_rows, seq_rows))

    rng = np.random.default_rng([seed, _STREAM_TRAIN])
    trace: list[float] = []
    for epoch in range(epochs):
        order = rng.permutation(len(groups))
        total = 0.0
        for step, gi in enumerate(order):
            q_rows, seq_rows = groups[int(gi)]
            try:
                pair_loss, sparse = _pair_gradient(model, q_rows, seq_rows)
            except NumericError as exc:
                raise NumericError(f"{exc} (lr={lr}, epoch={epoch}, step={step})") from None
            if not np.isfinite(pair_loss):
                raise NumericError(
                    f"training loss became non-finite (lr={lr}, epoch={epoch}, step={step})"
                )
            for r, vec in sparse.items():
                model.emb[r] -= lr * vec
            total += pair_loss
        trace.append(total / len(groups))
    return TrainResult(model=model, epoch_mean_loss=trace)


# -- retrieval -------------------------------------------------------------------------


def encode_pool(model: RetrieverModel, pool: Sequence[Instance]) -> np.ndarray:
    """Stack of pool sentence encodings, row i for pool[i]."""
    out = np.zeros((len(pool), model.d), dtype=np.float64)
    for i, inst in enumerate(pool):
        out[i] = encode(model, inst.tokens)
    return out


def retrieve(
    model: RetrieverModel,
    query: SuperpositionQuery,
    pool: Sequence[Instance],
    k: int,
    ontology: Ontology,
    pool_encodings: np.ndarray | None = None,
) -> list[tuple[str, float]]:
    """Exact top-k pool instances by inner product with the serialized query.

    Scores every pool sentence (no index, no approximation), sorts by score
    descending with instance id as the tie-break, and clamps k to the pool
    size. ``pool_encodings`` may carry precomputed ``encode_pool`` output.
    """
    if k < 0:
        raise ParameterError("k must be >= 0")
    if k == 0 or not pool:
        return []
    q_vec = encode(model, tokenize_query(serialize_query(query, ontology)))
    enc = pool_encodings if pool_encodings is not None else encode_pool(model, pool)
    scores = enc @ q_vec
    order = sorted(range(len(pool)), key=lambda i: (-scores[i], pool[i].id))
    return [(pool[i].id, float(scores[i])) for i in order[: min(k, len(pool))]]


# -- persistence -----------------------------------------------------------------------


def save_retriever(model: RetrieverModel, path: str | Path) -> None:
    rec = {
        "d": model.d,
        "vocab": model.vocab,
        "emb": [[float(x) for x in row] for row in model.emb],
    }
    Path(path).write_text(
        json.dumps(rec, ensure_ascii=False) + "\n", encoding="utf-8", newline="\n"
    )


def load_retriever(path: str | Path) -> RetrieverModel:
    rec = json.loads(Path(path).read_text(encoding="utf-8"))
    emb = np.asarray(rec["emb"], dtype=np.float64)
    model = RetrieverModel(vocab=list(rec["vocab"]), emb=emb)
    if model.d != int(rec["d"]):
        raise DataError(f"checkpoint d={rec['d']} does not match table width {model.d}")
    return model
