"""Few-shot span-type classifier, selection baselines, and the benchmark.

The classifier is intentionally small: per-type L2-regularized logistic
regression over the precomputed mention features, with micro-F1 pooled across
types. What is being measured is never the classifier itself but how much each
selection strategy's annotated sentences improve it.
"""

from __future__ import annotations

import csv
import hashlib
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, ParameterError
from .extractor import ExtractorConfig, logistic_loss_gradient
from .loop import (
    AnnotationRecord,
    SessionComponents,
    SessionConfig,
    annotate_oracle,
    augmented_training_set,
    run_session,
)
from .ontology import Ontology
from .sir import RetrieverModel
from .synth import Instance, TaskSpec, TaskSplit, gen_task

KNOWN_STRATEGIES = ("vanilla", "random", "kmeans", "entropy", "supercd")
REQUIRED_STRATEGIES = frozenset({"vanilla", "random", "supercd"})

_STREAM_RANDOM_SEL = 71
_STREAM_KMEANS = 72


def derive_seed(*parts) -> int:
    """Stable sub-seed from arbitrary labeled parts (order matters)."""
    h = hashlib.blake2b(repr(parts).encode("utf-8"), digest_size=8)
    return int.from_bytes(h.digest(), "big") >> 1


@dataclass(frozen=True)
class ClassifierHyper:
    lr: float = 1.0
    l2: float = 1e-3
    tol: float = 1e-6
    max_iters: int = 2000


@dataclass
class SpanClassifier:
    """Binary logistic classifier over mention features.

    ``degenerate`` holds the constant class when training labels were
    single-class; the linear parameters are unused in that case.
    """

    w: np.ndarray
    b: float
    degenerate: bool | None = None

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if self.degenerate is not None:
            return np.full(features.shape[0], 1.0 if self.degenerate else 0.0)
        z = features @ self.w + self.b
        return 1.0 / (1.0 + np.exp(-z))

    def predict(self, features: np.ndarray) -> np.ndarray:
        # Strictly above 0.5: a mention exactly on the boundary is negative.
        return self.predict_proba(features) > 0.5


def train_classifier(
    labeled: Sequence[tuple[np.ndarray, bool]],
    hyper: ClassifierHyper = ClassifierHyper(),
) -> SpanClassifier:
    """Gradient descent with step halving until the gradient norm is tiny.

    Single-class inputs short-circuit to a flagged constant classifier, since
    the logistic fit would diverge toward infinite bias.
    """
    if not labeled:
        raise DataError("train_classifier needs at least one labeled mention")
    x = np.stack([np.asarray(f, dtype=np.float64) for f, _ in labeled])
    y = np.array([1.0 if lab else 0.0 for _, lab in labeled])
    if np.all(y == 1.0) or np.all(y == 0.0):
        return SpanClassifier(
            w=np.zeros(x.shape[1]), b=0.0, degenerate=bool(y[0] == 1.0)
        )

    w = np.zeros(x.shape[1], dtype=np.float64)
    b = 0.0
    loss, gw, gb = logistic_loss_gradient(w, b, x, y, hyper.l2)
    for _ in range(hyper.max_iters):
        gnorm = max(float(np.max(np.abs(gw))), abs(gb))
        if gnorm < hyper.tol:
            break
        step = hyper.lr
        improved = False
        for _ in range(40):
            w_new = w - step * gw
            b_new = b - step * gb
            new_loss, new_gw, new_gb = logistic_loss_gradient(w_new, b_new, x, y, hyper.l2)
            if new_loss <= loss:
                w, b, loss, gw, gb = w_new, b_new, new_loss, new_gw, new_gb
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    return SpanClassifier(w=w, b=b, degenerate=None)


@dataclass(frozen=True)
class EvalResult:
    micro_f1: float
    precision: float
    recall: float
    tp: int
    fp: int
    fn: int


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def evaluate(
    classifier: SpanClassifier, test: Sequence[tuple[np.ndarray, bool]]
) -> EvalResult:
    """Span-level micro metrics; every 0/0 ratio resolves to 0."""
    if not test:
        raise DataError("evaluate needs a non-empty test set")
    x = np.stack([np.asarray(f, dtype=np.float64) for f, _ in test])
    gold = np.array([bool(lab) for _, lab in test])
    pred = classifier.predict(x)
    tp = int(np.sum(pred & gold))
    fp = int(np.sum(pred & ~gold))
    fn = int(np.sum(~pred & gold))
    precision, recall, f1 = _prf(tp, fp, fn)
    return EvalResult(micro_f1=f1, precision=precision, recall=recall, tp=tp, fp=fp, fn=fn)


# -- selection baselines -----------------------------------------------------------


@dataclass
class BaselineContext:
    """Inputs the baselines draw on: seed always, illustrative labels for entropy."""

    seed: int
    illustrative: Sequence[tuple[np.ndarray, bool]] | None = None
    hyper: ClassifierHyper = field(default_factory=ClassifierHyper)


def _instance_features(pool: Sequence[Instance]) -> np.ndarray:
    return np.stack([np.mean([m.feature for m in inst.mentions], axis=0) for inst in pool])


def _clamp_budget(budget: int, pool_size: int) -> int:
    if budget > pool_size:
        warnings.warn(
            f"budget {budget} exceeds pool size {pool_size}; clamping", stacklevel=3
        )
        return pool_size
    return budget


def baseline_select(
    strategy: str,
    pool: Sequence[Instance],
    budget: int,
    context: BaselineContext,
) -> list[str]:
    """Non-retrieval selection strategies, all deterministic in context.seed.

    random: uniform without replacement. kmeans: Lloyd (k=budget, 50
    iterations, farthest-point init) over per-sentence mean mention features,
    one nearest instance per centroid. entropy: highest mean predictive
    entropy under the vanilla classifier trained on the illustrative labels.
    """
    if budget < 0:
        raise ParameterError("budget must be >= 0")
    budget = _clamp_budget(budget, len(pool))
    if budget == 0:
        return []

    if strategy == "random":
        rng = np.random.default_rng([context.seed, _STREAM_RANDOM_SEL])
        picks = rng.choice(len(pool), size=budget, replace=False)
        return [pool[int(i)].id for i in picks]

    if strategy == "kmeans":
        feats = _instance_features(pool)
        rng = np.random.default_rng([context.seed, _STREAM_KMEANS])
        centroids = _kmeans_centroids(feats, budget, rng)
        chosen: list[str] = []
        used: set[int] = set()
        for c in centroids:
            dists = np.linalg.norm(feats - c, axis=1)
            order = sorted(range(len(pool)), key=lambda i: (dists[i], pool[i].id))
            for i in order:
                if i not in used:
                    used.add(i)
                    chosen.append(pool[i].id)
                    break
        return chosen

    if strategy == "entropy":
        if context.illustrative is None:
            raise ParameterError("entropy selection needs illustrative labels in the context")
        clf = train_classifier(context.illustrative, context.hyper)
        scores = []
        for inst in pool:
            p = clf.predict_proba(np.stack([m.feature for m in inst.mentions]))
            p = np.clip(p, 1e-12, 1.0 - 1e-12)
            ent = -(p * np.log(p) + (1 - p) * np.log(1 - p))
            scores.append(float(np.mean(ent)))
        order = sorted(range(len(pool)), key=lambda i: (-scores[i], pool[i].id))
        return [pool[i].id for i in order[:budget]]

    raise ParameterError(f"unknown baseline strategy: {strategy!r}")


def _kmeans_centroids(feats: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = feats.shape[0]
    first = int(rng.integers(n))
    centers = [feats[first]]
    min_d = np.linalg.norm(feats - feats[first], axis=1)
    while len(centers) < k:
        nxt = int(np.argmax(min_d))
        centers.append(feats[nxt])
        min_d = np.minimum(min_d, np.linalg.norm(feats - feats[nxt], axis=1))
    centroids = np.stack(centers)
    for _ in range(50):
        d = np.linalg.norm(feats[:, None, :] - centroids[None, :, :], axis=2)
        assign = np.argmin(d, axis=1)
        new_centroids = centroids.copy()
        moved = False
        for j in range(k):
            members = feats[assign == j]
            if len(members):
                c = members.mean(axis=0)
                if not np.allclose(c, centroids[j]):
                    moved = True
                new_centroids[j] = c
        centroids = new_centroids
        if not moved:
            break
    return centroids


# -- benchmark ----------------------------------------------------------------------


@dataclass
class BenchmarkConfig:
    """Shared knobs for every benchmark cell."""

    retriever: RetrieverModel
    k: int = 5
    budget: int = 5
    pool_fraction: float = 0.5
    tau: float = 0.5
    m_cap: int = 8
    extractor: ExtractorConfig = field(default_factory=lambda: ExtractorConfig(p_drop=0.1))
    hyper: ClassifierHyper = field(default_factory=ClassifierHyper)
    base_seed: int = 0


@dataclass(frozen=True)
class ReportRow:
    seed: int
    strategy: str
    f1: float
    precision: float
    recall: float
    unseen_f1: float
    coverage: int
    budget_used: int


@dataclass
class BenchmarkReport:
    rows: list[ReportRow]
    means: dict[str, dict[str, float]]
    config: dict

    def mean(self, strategy: str, metric: str = "f1") -> float:
        return self.means[strategy][metric]


def _illustrative_closure_union(split: TaskSplit, ontology: Ontology) -> frozenset[str]:
    union: set[str] = set()
    for inst in split.illustrative:
        for m in inst.mentions:
            union |= ontology.closure(m.direct_concepts)
    return frozenset(union)


def _coverage(
    selected: Sequence[str], split: TaskSplit, seen: frozenset[str]
) -> int:
    by_id = {inst.id: inst for inst in split.pool}
    concepts: set[str] = set()
    for iid in selected:
        inst = by_id.get(iid)
        if inst is None:
            continue
        for m in inst.mentions:
            concepts |= set(m.direct_concepts)
    return len(concepts - seen)


def run_benchmark(
    corpus: Sequence[Instance],
    ontology: Ontology,
    task_specs: Sequence[TaskSpec],
    strategies: Sequence[str],
    n_seeds: int,
    config: BenchmarkConfig,
) -> BenchmarkReport:
    """Grid of (seed, strategy) cells pooled over the task types.

    Every strategy in a cell shares the same task split, annotates its
    selections with the oracle, trains the same classifier family on the
    augmented set, and is scored on the same test mentions. unseen_f1
    restricts scoring to test mentions none of whose direct concepts appear
    anywhere in the illustrative mentions' closures; coverage counts the
    distinct out-of-illustrative direct concepts among selected sentences.
    """
    if n_seeds < 1:
        raise ParameterError("n_seeds must be >= 1")
    if not task_specs:
        raise ParameterError("at least one task spec is required")
    missing = REQUIRED_STRATEGIES - set(strategies)
    if missing:
        raise ParameterError(f"strategies must include {sorted(missing)}")
    for s in strategies:
        if s not in KNOWN_STRATEGIES:
            raise ParameterError(f"unknown strategy: {s!r}")

    rows: list[ReportRow] = []
    for seed in range(n_seeds):
        splits: list[TaskSplit] = []
        unions: list[frozenset[str]] = []
        illus_labels: list[list[tuple[np.ndarray, bool]]] = []
        for t_idx, spec in enumerate(task_specs):
            split = gen_task(
                corpus,
                ontology,
                spec,
                config.pool_fraction,
                derive_seed(config.base_seed, "task", seed, t_idx),
            )
            splits.append(split)
            unions.append(_illustrative_closure_union(split, ontology))
            illus_labels.append(
                [
                    (m.feature, split.labels[m.key(inst.id)])
                    for inst in split.illustrative
                    for m in inst.mentions
                ]
            )

        for strategy in strategies:
            tp = fp = fn = 0
            u_tp = u_fp = u_fn = 0
            coverage = 0
            budget_used = 0
            for t_idx, spec in enumerate(task_specs):
                split = splits[t_idx]
                seen = unions[t_idx]
                cell_seed = derive_seed(config.base_seed, "cell", strategy, seed, t_idx)

                if strategy == "vanilla":
                    selected: list[str] = []
                    records: list[AnnotationRecord] = []
                elif strategy == "supercd":
                    session = run_session(
                        split,
                        SessionConfig(
                            budget=config.budget,
                            annotator="oracle",
                            tau=config.tau,
                            m_cap=config.m_cap,
                            seed=cell_seed,
                        ),
                        SessionComponents(
                            ontology=ontology,
                            retriever=config.retriever,
                            extractor=ExtractorConfig(
                                backend=config.extractor.backend,
                                p_drop=config.extractor.p_drop,
                                p_spur=config.extractor.p_spur,
                                seed=cell_seed,
                                model=config.extractor.model,
                            ),
                        ),
                    )
                    selected = session.selected
                    records = session.records
                else:
                    selected = baseline_select(
                        strategy,
                        split.pool,
                        config.budget,
                        BaselineContext(
                            seed=cell_seed,
                            illustrative=illus_labels[t_idx],
                            hyper=config.hyper,
                        ),
                    )
                    by_id = {inst.id: inst for inst in split.pool}
                    records = [
                        annotate_oracle(by_id[iid], split.target_concepts, ontology)
                        for iid in selected
                    ]

                labeled = augmented_training_set(split, records)
                clf = train_classifier(labeled, config.hyper)

                feats = np.stack(
                    [m.feature for inst in split.test for m in inst.mentions]
                )
                gold = np.array(
                    [
                        split.labels[m.key(inst.id)]
                        for inst in split.test
                        for m in inst.mentions
                    ]
                )
                unseen = np.array(
                    [
                        not (set(m.direct_concepts) & seen)
                        for inst in split.test
                        for m in inst.mentions
                    ]
                )
                pred = clf.predict(feats)
                tp += int(np.sum(pred & gold))
                fp += int(np.sum(pred & ~gold))
                fn += int(np.sum(~pred & gold))
                u_tp += int(np.sum(pred & gold & unseen))
                u_fp += int(np.sum(pred & ~gold & unseen))
                u_fn += int(np.sum(~pred & gold & unseen))
                coverage += _coverage(selected, split, seen)
                budget_used += len(selected)

            precision, recall, f1 = _prf(tp, fp, fn)
            _, _, unseen_f1 = _prf(u_tp, u_fp, u_fn)
            rows.append(
                ReportRow(
                    seed=seed,
                    strategy=strategy,
                    f1=f1,
                    precision=precision,
                    recall=recall,
                    unseen_f1=unseen_f1,
                    coverage=coverage,
                    budget_used=budget_used,
                )
            )

    means: dict[str, dict[str, float]] = {}
    for strategy in strategies:
        cells = [r for r in rows if r.strategy == strategy]
        means[strategy] = {
            "f1": float(np.mean([r.f1 for r in cells])),
            "precision": float(np.mean([r.precision for r in cells])),
            "recall": float(np.mean([r.recall for r in cells])),
            "unseen_f1": float(np.mean([r.unseen_f1 for r in cells])),
            "coverage": float(np.mean([r.coverage for r in cells])),
            "budget_used": float(np.mean([r.budget_used for r in cells])),
        }

    echo = {
        "k": config.k,
        "budget": config.budget,
        "pool_fraction": config.pool_fraction,
        "tau": config.tau,
        "m_cap": config.m_cap,
        "n_seeds": n_seeds,
        "strategies": list(strategies),
        "n_types": len(task_specs),
        "base_seed": config.base_seed,
    }
    return BenchmarkReport(rows=rows, means=means, config=echo)


def default_task_specs(
    ontology: Ontology, n_types: int, k: int, skew: float, seed: int
) -> list[TaskSpec]:
    """Pick target subtrees suited to the generalization setup.

    Eligible targets are non-root, non-leaf concepts with at least two leaf
    descendants whose most frequent leaf can supply the k shots. Types are
    drawn without subtree overlap so per-type sessions stay independent; the
    illustrative source is the target's most frequent leaf, giving skewed
    shots something to concentrate on.
    """
    root = ontology.root_id
    eligible: list[tuple[str, str]] = []
    for cid in ontology.ids():
        if cid == root or not ontology.children(cid):
            continue
        leaves = [d for d in ontology.descendants(cid) if not ontology.children(d)]
        if len(leaves) < 2:
            continue
        leaves.sort(key=lambda l: (-ontology.concept(l).corpus_frequency, l))
        best = leaves[0]
        if ontology.concept(best).corpus_frequency < max(k + 2, 8):
            continue
        eligible.append((cid, best))
    if len(eligible) < n_types:
        raise DataError(
            f"only {len(eligible)} eligible target subtrees, need {n_types}"
        )

    rng = np.random.default_rng([seed, 81])
    order = rng.permutation(len(eligible))
    specs: list[TaskSpec] = []
    blocked: set[str] = set()
    for i in order:
        cid, source = eligible[int(i)]
        subtree = {cid} | ontology.descendants(cid)
        if subtree & blocked:
            continue
        blocked |= subtree
        specs.append(
            TaskSpec(
                target_concepts=frozenset([cid]),
                illustrative_source=source,
                k=k,
                skew=skew,
            )
        )
        if len(specs) == n_types:
            break
    if len(specs) < n_types:
        raise DataError(
            f"could not find {n_types} non-overlapping target subtrees (found {len(specs)})"
        )
    return specs


# -- report output --------------------------------------------------------------------


def write_report_csv(report: BenchmarkReport, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["seed", "strategy", "f1", "precision", "recall", "unseen_f1", "coverage", "budget_used"]
        )
        for r in report.rows:
            writer.writerow(
                [
                    r.seed,
                    r.strategy,
                    f"{r.f1:.6f}",
                    f"{r.precision:.6f}",
                    f"{r.recall:.6f}",
                    f"{r.unseen_f1:.6f}",
                    r.coverage,
                    r.budget_used,
                ]
            )


def write_report_json(report: BenchmarkReport, path: str | Path) -> None:
    payload = {
        "config": report.config,
        "rows": [
            {
                "seed": r.seed,
                "strategy": r.strategy,
                "f1": r.f1,
                "precision": r.precision,
                "recall": r.recall,
                "unseen_f1": r.unseen_f1,
                "coverage": r.coverage,
                "budget_used": r.budget_used,
            }
            for r in report.rows
        ],
        "means": report.means,
    }
    Path(path).write_text(
        json.dumps(payload, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
        newline="\n",
    )


def load_report_json(path: str | Path) -> BenchmarkReport:
    rec = json.loads(Path(path).read_text(encoding="utf-8"))
    rows = [ReportRow(**row) for row in rec["rows"]]
    return BenchmarkReport(rows=rows, means=rec["means"], config=rec.get("config", {}))
