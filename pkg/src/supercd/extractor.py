"""Concept extraction: mention -> generalized concepts, plus common-concept voting.

Two interchangeable backends. The oracle reads gold direct concepts off the
mention and walks the ontology, optionally corrupted by ancestor dropout and
spurious additions. The learned backend is a one-vs-rest logistic model over
bag-of-token counts, trained from (tokens, concept set) pairs; it never sees
gold mention annotations at prediction time.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, ParameterError
from .ontology import Ontology
from .synth import Instance, Mention


@dataclass(frozen=True)
class ExtractorConfig:
    """Backend choice plus oracle noise knobs.

    p_drop: probability each strict ancestor is omitted (direct concepts are
    never dropped). p_spur: probability one uniformly random non-closure
    concept is appended. Both apply to the oracle backend only.
    """

    backend: str = "oracle"
    p_drop: float = 0.0
    p_spur: float = 0.0
    seed: int = 0
    model: "LearnedExtractor | None" = None

    def __post_init__(self):
        if self.backend not in ("oracle", "learned"):
            raise ParameterError(f"unknown extractor backend: {self.backend!r}")
        if not 0.0 <= self.p_drop <= 1.0:
            raise ParameterError("p_drop must lie in [0, 1]")
        if not 0.0 <= self.p_spur <= 1.0:
            raise ParameterError("p_spur must lie in [0, 1]")
        if self.backend == "learned" and self.model is None:
            raise ParameterError("learned backend requires a trained model")


@dataclass(frozen=True)
class CommonConceptSet:
    """Concepts voted common across extractor outputs, in query order.

    ``counts`` is the number of extractor outputs each kept concept appeared
    in; ``frequencies`` snapshots ontology corpus frequencies at aggregation
    time, because downstream query ordering tie-breaks on them.
    """

    concepts: tuple[str, ...]
    counts: dict[str, int]
    frequencies: dict[str, int]

    def __len__(self) -> int:
        return len(self.concepts)

    def __iter__(self):
        return iter(self.concepts)


def _mention_rng(config: ExtractorConfig, instance_id: str, span: tuple[int, int]) -> np.random.Generator:
    # Seeded per (config, mention) so extraction is call-order independent.
    digest = hashlib.blake2b(instance_id.encode("utf-8"), digest_size=6).digest()
    return np.random.default_rng(
        [config.seed, int.from_bytes(digest, "big"), span[0], span[1]]
    )


def extract(
    instance: Instance,
    mention: Mention,
    ontology: Ontology,
    config: ExtractorConfig,
) -> list[str]:
    """Concepts the extractor attributes to one mention.

    Oracle: the mention's direct concepts plus each strict ancestor kept with
    probability 1 - p_drop, sorted; with probability p_spur one random
    non-closure concept is appended after them. Learned: every concept whose
    model score reaches 0.5 on the sentence's token bag.
    """
    if not any(m is mention or m.span == mention.span for m in instance.mentions):
        raise DataError(f"mention {mention.span} does not belong to instance {instance.id}")

    if config.backend == "learned":
        assert config.model is not None
        return config.model.predict(instance.tokens)

    direct = set(mention.direct_concepts)
    for cid in direct:
        ontology.concept(cid)
    closure = ontology.closure(direct)
    rng = _mention_rng(config, instance.id, mention.span)
    kept = set(direct)
    for cid in sorted(closure - direct):
        if rng.random() >= config.p_drop:
            kept.add(cid)
    out = sorted(kept)
    if config.p_spur > 0 and rng.random() < config.p_spur:
        outside = [cid for cid in ontology.ids() if cid not in closure]
        if outside:
            out.append(outside[int(rng.integers(len(outside)))])
    return out


def common_concepts(
    ce_outputs: Sequence[Iterable[str]],
    ontology: Ontology,
    tau: float = 0.5,
    m_cap: int = 8,
) -> CommonConceptSet:
    """Keep concepts appearing in at least ceil(tau * n) extractor outputs.

    Ordered by appearance count descending, then ontology corpus frequency
    descending, then id ascending; truncated to ``m_cap``.
    """
    n = len(ce_outputs)
    if n < 1:
        raise DataError("common_concepts needs at least one extractor output")
    if not 0.0 <= tau <= 1.0:
        raise ParameterError("tau must lie in [0, 1]")
    if m_cap < 1:
        raise ParameterError("m_cap must be >= 1")

    counts: dict[str, int] = {}
    for output in ce_outputs:
        for cid in set(output):
            counts[cid] = counts.get(cid, 0) + 1
    # The epsilon guards against float products landing a hair above an
    # integer (e.g. 0.6 * 5) and inflating the threshold.
    threshold = math.ceil(tau * n - 1e-9)
    kept = [cid for cid, c in counts.items() if c >= threshold]
    freqs = {cid: ontology.concept(cid).corpus_frequency for cid in kept}
    kept.sort(key=lambda cid: (-counts[cid], -freqs[cid], cid))
    kept = kept[:m_cap]
    return CommonConceptSet(
        concepts=tuple(kept),
        counts={cid: counts[cid] for cid in kept},
        frequencies={cid: freqs[cid] for cid in kept},
    )


# -- learned backend -------------------------------------------------------------


@dataclass
class LearnedExtractor:
    """One-vs-rest logistic model over bag-of-token counts."""

    vocab: list[str]
    concepts: list[str]
    weights: np.ndarray  # (n_concepts, n_vocab)
    bias: np.ndarray  # (n_concepts,)
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._index:
            self._index = {tok: i for i, tok in enumerate(self.vocab)}

    def _featurize(self, tokens: Sequence[str]) -> np.ndarray:
        x = np.zeros(len(self.vocab), dtype=np.float64)
        for tok in tokens:
            i = self._index.get(tok)
            if i is not None:
                x[i] += 1.0
        return x

    def scores(self, tokens: Sequence[str]) -> np.ndarray:
        """Per-concept probabilities for one token bag."""
        z = self.weights @ self._featurize(tokens) + self.bias
        return 1.0 / (1.0 + np.exp(-z))

    def predict(self, tokens: Sequence[str]) -> list[str]:
        s = self.scores(tokens)
        return [cid for cid, p in zip(self.concepts, s) if p >= 0.5]


@dataclass(frozen=True)
class ExtractorHyper:
    epochs: int = 40
    lr: float = 1.0
    l2: float = 1e-4
    seed: int = 0


def logistic_loss_gradient(
    w: np.ndarray,
    b: float,
    x: np.ndarray,
    y: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, float]:
    """Mean L2-regularized logistic loss and its analytic gradient.

    x: (n, v) count matrix; y: (n,) 0/1 labels. The regularizer covers the
    weight vector only, not the bias.
    """
    n = x.shape[0]
    z = x @ w + b
    # log(1 + e^z) evaluated stably on both tails.
    pos = np.clip(z, 0.0, None)
    log1pexp = pos + np.log1p(np.exp(-np.abs(z)))
    loss = float(np.mean(log1pexp - y * z) + 0.5 * l2 * np.dot(w, w))
    p = 1.0 / (1.0 + np.exp(-z))
    resid = (p - y) / n
    grad_w = x.T @ resid + l2 * w
    grad_b = float(np.sum(resid))
    return loss, grad_w, grad_b


def train_extractor(
    pairs: Sequence[tuple[Sequence[str], Iterable[str]]],
    ontology: Ontology,
    hyper: ExtractorHyper = ExtractorHyper(),
) -> LearnedExtractor:
    """Fit the one-vs-rest logistic model on (tokens, concept set) pairs.

    Full-batch gradient descent with per-epoch step halving, so the training
    loss never increases between epochs. Weights start at zero, which makes
    the zero-epoch model score exactly 0.5 everywhere.
    """
    if not pairs:
        raise DataError("train_extractor needs at least one pair")
    concept_set: set[str] = set()
    for _, concepts in pairs:
        concept_set.update(concepts)
    for cid in concept_set:
        ontology.concept(cid)
    concepts = sorted(concept_set)
    if not concepts:
        raise DataError("no concepts present in the training pairs")

    vocab = sorted({tok for tokens, _ in pairs for tok in tokens})
    index = {tok: i for i, tok in enumerate(vocab)}
    n, v = len(pairs), len(vocab)
    x = np.zeros((n, v), dtype=np.float64)
    labels = np.zeros((n, len(concepts)), dtype=np.float64)
    concept_index = {cid: j for j, cid in enumerate(concepts)}
    for i, (tokens, cids) in enumerate(pairs):
        for tok in tokens:
            x[i, index[tok]] += 1.0
        for cid in cids:
            labels[i, concept_index[cid]] = 1.0

    weights = np.zeros((len(concepts), v), dtype=np.float64)
    bias = np.zeros(len(concepts), dtype=np.float64)
    for j in range(len(concepts)):
        w = weights[j]
        b = float(bias[j])
        loss, gw, gb = logistic_loss_gradient(w, b, x, labels[:, j], hyper.l2)
        for _ in range(hyper.epochs):
            step = hyper.lr
            for _ in range(30):
                w_new = w - step * gw
                b_new = b - step * gb
                new_loss, new_gw, new_gb = logistic_loss_gradient(
                    w_new, b_new, x, labels[:, j], hyper.l2
                )
                if new_loss <= loss:
                    w, b, loss, gw, gb = w_new, b_new, new_loss, new_gw, new_gb
                    break
                step *= 0.5
            else:
                break  # no step improves: converged for this concept
        weights[j] = w
        bias[j] = b

    return LearnedExtractor(vocab=vocab, concepts=concepts, weights=weights, bias=bias)


def corpus_training_pairs(
    corpus: Sequence[Instance], ontology: Ontology
) -> list[tuple[list[str], frozenset[str]]]:
    """Sentence-level (tokens, closure union) pairs for extractor training."""
    pairs = []
    for inst in corpus:
        concepts: set[str] = set()
        for m in inst.mentions:
            concepts |= ontology.closure(m.direct_concepts)
        pairs.append((inst.tokens, frozenset(concepts)))
    return pairs


def save_extractor(model: LearnedExtractor, path: str | Path) -> None:
    rec = {
        "vocab": model.vocab,
        "concepts": model.concepts,
        "weights": [[float(x) for x in row] for row in model.weights],
        "bias": [float(x) for x in model.bias],
    }
    Path(path).write_text(
        json.dumps(rec, ensure_ascii=False) + "\n", encoding="utf-8", newline="\n"
    )


def load_extractor(path: str | Path) -> LearnedExtractor:
    rec = json.loads(Path(path).read_text(encoding="utf-8"))
    return LearnedExtractor(
        vocab=list(rec["vocab"]),
        concepts=list(rec["concepts"]),
        weights=np.asarray(rec["weights"], dtype=np.float64),
        bias=np.asarray(rec["bias"], dtype=np.float64),
    )
