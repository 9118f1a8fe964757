"""Shared fixtures: a hand-built nine-concept taxonomy plus seeded worlds.

The small world keeps unit tests fast; the full-scale world (200 concepts,
20k sentences, 10k training pairs) is session-scoped and only materializes
when the end-to-end acceptance checks request it.
"""

from __future__ import annotations

import time
import warnings
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import settings

from supercd.extractor import ExtractorConfig
from supercd.fsner import BenchmarkConfig, default_task_specs, run_benchmark
from supercd.ontology import Concept, Ontology
from supercd.sir import build_dataset, build_vocab, init_model, train
from supercd.synth import Instance, Mention, attach_frequencies, gen_corpus, gen_ontology

settings.register_profile("suite", max_examples=50, deadline=None)
settings.load_profile("suite")


# -- hand-built taxonomy -----------------------------------------------------------

ONT_A_CONCEPTS = [
    ("Entity", "Entity"),
    ("Organization", "Organization"),
    ("EduIns", "Educational institution"),
    ("ResIns", "Research institution"),
    ("SportsOrg", "Sports organization"),
    ("University", "University"),
    ("HighSchool", "High school"),
    ("AcademySci", "Academy of sciences"),
]

ONT_A_EDGES = [
    ("Organization", "Entity"),
    ("EduIns", "Organization"),
    ("ResIns", "Organization"),
    ("SportsOrg", "Organization"),
    ("University", "EduIns"),
    ("University", "ResIns"),
    ("HighSchool", "EduIns"),
    ("AcademySci", "ResIns"),
]


def make_ont_a() -> Ontology:
    return Ontology(
        concepts=[Concept(cid, name) for cid, name in ONT_A_CONCEPTS],
        edges=list(ONT_A_EDGES),
    )


@pytest.fixture(scope="session")
def ont_a() -> Ontology:
    return make_ont_a()


def make_instance(
    iid: str, direct: str | frozenset, tokens: list[str] | None = None, d_f: int = 4
) -> Instance:
    """One-mention sentence over explicit direct concepts, for hand-built corpora."""
    direct_set = frozenset([direct]) if isinstance(direct, str) else frozenset(direct)
    toks = tokens if tokens is not None else [f"word-{iid}", "said", "so"]
    mention = Mention(span=(0, 1), direct_concepts=direct_set, feature=np.zeros(d_f))
    return Instance(id=iid, tokens=toks, mentions=[mention])


# -- generated worlds --------------------------------------------------------------


@pytest.fixture(scope="session")
def small_world() -> SimpleNamespace:
    """A compact generated world for pipeline unit tests (fast to build)."""
    ontology = gen_ontology(
        n_concepts=60, depth=4, branching_range=(2, 4), extra_parent_prob=0.15, seed=5
    )
    corpus, view = gen_corpus(
        ontology,
        n_sentences=3000,
        zipf_s=1.1,
        signature_tokens_per_concept=2,
        noise_sigma=0.05,
        d_f=32,
        seed=5,
    )
    return SimpleNamespace(ontology=ontology, corpus=corpus, view=view)


@pytest.fixture(scope="session")
def small_retriever(small_world) -> SimpleNamespace:
    """A briefly trained retriever on the small world, plus its untrained init."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        dataset = build_dataset(
            small_world.ontology,
            small_world.corpus,
            n_pairs=800,
            n_neg_excluded=10,
            n_neg_random=10,
            max_included=1,
            seed=5,
        )
    vocab = build_vocab(small_world.corpus, small_world.ontology)
    model_init = init_model(vocab, d=32, seed=5)
    trained = train(
        model_init, dataset, small_world.corpus, small_world.ontology, lr=0.1, epochs=2, seed=5
    ).model
    return SimpleNamespace(model=trained, model_init=model_init, dataset=dataset)


# -- full-scale world for the end-to-end acceptance checks -------------------------


@pytest.fixture(scope="session")
def accept_world() -> SimpleNamespace:
    t0 = time.perf_counter()
    ontology = gen_ontology(
        n_concepts=200, depth=5, branching_range=(2, 4), extra_parent_prob=0.15, seed=0
    )
    corpus, _ = gen_corpus(
        ontology,
        n_sentences=20000,
        zipf_s=1.1,
        signature_tokens_per_concept=2,
        noise_sigma=0.05,
        d_f=32,
        seed=0,
    )
    view = attach_frequencies(ontology, corpus)
    return SimpleNamespace(
        ontology=ontology, corpus=corpus, view=view, seconds=time.perf_counter() - t0
    )


@pytest.fixture(scope="session")
def accept_retriever(accept_world) -> SimpleNamespace:
    t0 = time.perf_counter()
    dataset = build_dataset(
        accept_world.ontology,
        accept_world.corpus,
        n_pairs=10000,
        n_neg_excluded=10,
        n_neg_random=10,
        max_included=1,
        seed=0,
    )
    vocab = build_vocab(accept_world.corpus, accept_world.ontology)
    model = init_model(vocab, d=64, seed=0)
    trained = train(
        model, dataset, accept_world.corpus, accept_world.ontology, lr=0.1, epochs=5, seed=0
    ).model
    return SimpleNamespace(model=trained, dataset=dataset, seconds=time.perf_counter() - t0)


def _benchmark(accept_world, accept_retriever, strategies, budget):
    specs = default_task_specs(accept_world.view, n_types=3, k=5, skew=1.0, seed=0)
    config = BenchmarkConfig(retriever=accept_retriever.model, budget=budget, base_seed=0)
    return run_benchmark(
        accept_world.corpus, accept_world.view, specs, strategies, n_seeds=10, config=config
    )


@pytest.fixture(scope="session")
def accept_bench(accept_world, accept_retriever) -> SimpleNamespace:
    """10-seed benchmark over all five strategies at the default budget."""
    t0 = time.perf_counter()
    report = _benchmark(
        accept_world,
        accept_retriever,
        ["vanilla", "random", "kmeans", "entropy", "supercd"],
        budget=5,
    )
    return SimpleNamespace(report=report, seconds=time.perf_counter() - t0)


@pytest.fixture(scope="session")
def accept_budget_sweep(accept_world, accept_retriever, accept_bench) -> SimpleNamespace:
    """supercd means at budgets 5/10/20; budget 5 reuses the main benchmark."""
    t0 = time.perf_counter()
    means = {5: accept_bench.report.mean("supercd")}
    for budget in (10, 20):
        report = _benchmark(
            accept_world, accept_retriever, ["vanilla", "random", "supercd"], budget=budget
        )
        means[budget] = report.mean("supercd")
    return SimpleNamespace(means=means, seconds=time.perf_counter() - t0)
