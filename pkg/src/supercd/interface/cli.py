"""Command-line entry points for the pipeline stages.

Every numeric flag defaults to the corresponding config value, so a bare
command runs the documented desk-scale defaults and a TOML file (via
--config) can retune everything at once.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..errors import SupercdError
from ..extractor import ExtractorConfig, ExtractorHyper, corpus_training_pairs, save_extractor, train_extractor
from ..fsner import (
    BenchmarkConfig,
    ClassifierHyper,
    default_task_specs,
    derive_seed,
    load_report_json,
    run_benchmark,
    write_report_csv,
    write_report_json,
)
from ..ontology import load_ontology, save_ontology
from ..sir import (
    build_dataset,
    build_vocab,
    init_model,
    load_dataset,
    load_retriever,
    save_dataset,
    save_retriever,
    train,
)
from ..synth import attach_frequencies, gen_corpus, gen_ontology, load_corpus, save_corpus
from .config import load_config
from .sessions import SessionManager
from .store import SessionStore


def _pick(flag, cfg: dict, key: str):
    return cfg[key] if flag is None else flag


def cmd_gen_ontology(args) -> int:
    cfg = load_config(args.config)["synth"]
    ontology = gen_ontology(
        n_concepts=_pick(args.concepts, cfg, "n_concepts"),
        depth=_pick(args.depth, cfg, "depth"),
        branching_range=(
            _pick(args.branch_min, cfg, "branch_min"),
            _pick(args.branch_max, cfg, "branch_max"),
        ),
        extra_parent_prob=_pick(args.extra_parent_prob, cfg, "extra_parent_prob"),
        seed=_pick(args.seed, cfg, "seed"),
    )
    save_ontology(ontology, args.out)
    print(f"wrote {len(ontology)} concepts, {len(ontology.edges())} edges -> {args.out}")
    return 0


def cmd_gen_corpus(args) -> int:
    cfg = load_config(args.config)["synth"]
    ontology = load_ontology(args.ontology)
    instances, view = gen_corpus(
        ontology,
        n_sentences=_pick(args.sentences, cfg, "n_sentences"),
        zipf_s=_pick(args.zipf_s, cfg, "zipf_s"),
        signature_tokens_per_concept=_pick(args.sig_tokens, cfg, "signature_tokens_per_concept"),
        noise_sigma=_pick(args.noise_sigma, cfg, "noise_sigma"),
        d_f=_pick(args.dim, cfg, "d_f"),
        seed=_pick(args.seed, cfg, "seed"),
    )
    save_corpus(instances, args.out)
    n_mentions = sum(len(inst.mentions) for inst in instances)
    print(f"wrote {len(instances)} sentences, {n_mentions} mentions -> {args.out}")
    if args.ontology_out:
        save_ontology(view, args.ontology_out)
        print(f"wrote frequency-attached ontology -> {args.ontology_out}")
    return 0


def cmd_build_sir_data(args) -> int:
    cfg = load_config(args.config)["sir"]
    ontology = load_ontology(args.ontology)
    corpus = load_corpus(args.corpus)
    dataset = build_dataset(
        ontology,
        corpus,
        n_pairs=_pick(args.pairs, cfg, "n_pairs"),
        n_neg_excluded=_pick(args.neg_excluded, cfg, "n_neg_excluded"),
        n_neg_random=_pick(args.neg_random, cfg, "n_neg_random"),
        max_included=_pick(args.max_included, cfg, "max_included"),
        seed=_pick(args.seed, cfg, "seed"),
    )
    save_dataset(dataset, args.out)
    print(f"emitted {len(dataset)} pairs (skipped {dataset.skipped}) -> {args.out}")
    return 0


def cmd_train_sir(args) -> int:
    cfg = load_config(args.config)["sir"]
    ontology = load_ontology(args.ontology)
    corpus = load_corpus(args.corpus)
    dataset = load_dataset(args.data)
    vocab = build_vocab(corpus, ontology)
    seed = _pick(args.seed, cfg, "seed")
    model = init_model(
        vocab,
        d=_pick(args.dim, cfg, "d"),
        seed=seed,
        scale=_pick(args.init_scale, cfg, "init_scale"),
    )
    result = train(
        model,
        dataset,
        corpus,
        ontology,
        lr=_pick(args.lr, cfg, "lr"),
        epochs=_pick(args.epochs, cfg, "epochs"),
        seed=seed,
    )
    save_retriever(result.model, args.out)
    losses = ", ".join(f"{x:.4f}" for x in result.epoch_mean_loss)
    print(f"trained {len(vocab)}-token table (d={result.model.d}); epoch losses: {losses}")
    print(f"wrote retriever -> {args.out}")
    return 0


def cmd_train_ce(args) -> int:
    cfg = load_config(args.config)["extractor"]
    ontology = load_ontology(args.ontology)
    corpus = load_corpus(args.corpus)
    pairs = corpus_training_pairs(corpus, ontology)
    sample = _pick(args.sample, cfg, "sample")
    seed = args.seed if args.seed is not None else 0
    if sample and len(pairs) > sample:
        import numpy as np

        rng = np.random.default_rng([seed, 91])
        picks = rng.choice(len(pairs), size=sample, replace=False)
        pairs = [pairs[int(i)] for i in sorted(picks)]
    model = train_extractor(
        pairs,
        ontology,
        ExtractorHyper(
            epochs=_pick(args.epochs, cfg, "epochs"),
            lr=_pick(args.lr, cfg, "lr"),
            l2=_pick(args.l2, cfg, "l2"),
            seed=seed,
        ),
    )
    save_extractor(model, args.out)
    print(
        f"trained extractor over {len(pairs)} sentences, "
        f"{len(model.concepts)} concepts, {len(model.vocab)} tokens -> {args.out}"
    )
    return 0


def cmd_run_experiment(args) -> int:
    cfg = load_config(args.config)
    fcfg = cfg["fsner"]
    lcfg = cfg["loop"]
    ecfg = cfg["extractor"]

    ontology = attach_frequencies(load_ontology(args.ontology), load_corpus(args.corpus))
    corpus = load_corpus(args.corpus)
    k = _pick(args.shots, fcfg, "k")
    budget = _pick(args.budget, lcfg, "budget")
    n_seeds = _pick(args.seeds, fcfg, "n_seeds")
    n_types = _pick(args.types, fcfg, "n_types")
    skew = _pick(args.skew, fcfg, "skew")
    base_seed = _pick(args.base_seed, fcfg, "base_seed")
    strategies = (
        [s.strip() for s in args.strategies.split(",") if s.strip()]
        if args.strategies
        else list(fcfg["strategies"])
    )
    annotator = _pick(args.annotator, lcfg, "annotator")
    specs = default_task_specs(ontology, n_types=n_types, k=k, skew=skew, seed=base_seed)

    if annotator == "human":
        store_dir = args.store or cfg["service"]["store"]
        manager = SessionManager(SessionStore(store_dir))
        created = []
        for seed in range(n_seeds):
            for t_idx, spec in enumerate(specs):
                state = manager.create_session(
                    {
                        "ontology": args.ontology,
                        "corpus": args.corpus,
                        "retriever": args.retriever,
                        "task": {
                            "target": sorted(spec.target_concepts),
                            "illustrative_source": spec.illustrative_source,
                            "k": spec.k,
                            "skew": spec.skew,
                            "pool_fraction": _pick(args.pool_fraction, fcfg, "pool_fraction"),
                            "seed": derive_seed(base_seed, "task", seed, t_idx),
                        },
                        "budget": budget,
                        "annotator": "human",
                        "tau": ecfg["tau"],
                        "m_cap": ecfg["m_cap"],
                        "seed": derive_seed(base_seed, "cell", "supercd", seed, t_idx),
                        "extractor": {"p_drop": ecfg["p_drop"], "p_spur": ecfg["p_spur"]},
                    }
                )
                created.append(state["session_id"])
        print(f"created {len(created)} sessions awaiting annotation in {store_dir}:")
        for sid in created:
            print(f"  {sid}")
        print("start the service with `supercd serve --store " + str(store_dir) + "`")
        print("and annotate via the web panel or POST /sessions/<id>/annotations")
        return 0

    retriever = load_retriever(args.retriever)
    config = BenchmarkConfig(
        retriever=retriever,
        k=k,
        budget=budget,
        pool_fraction=_pick(args.pool_fraction, fcfg, "pool_fraction"),
        tau=ecfg["tau"],
        m_cap=ecfg["m_cap"],
        extractor=ExtractorConfig(p_drop=ecfg["p_drop"], p_spur=ecfg["p_spur"]),
        hyper=ClassifierHyper(lr=fcfg["classifier_lr"], l2=fcfg["classifier_l2"]),
        base_seed=base_seed,
    )
    report = run_benchmark(corpus, ontology, specs, strategies, n_seeds, config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_report_csv(report, out_dir / "report.csv")
    write_report_json(report, out_dir / "report.json")
    _print_means(report.means, strategies)
    print(f"wrote {out_dir / 'report.csv'} and {out_dir / 'report.json'}")
    return 0


def _print_means(means: dict, strategies: list[str]) -> None:
    header = f"{'strategy':<10} {'f1':>8} {'precision':>10} {'recall':>8} {'unseen_f1':>10} {'coverage':>9} {'budget':>7}"
    print(header)
    for s in strategies:
        m = means[s]
        print(
            f"{s:<10} {m['f1']:>8.4f} {m['precision']:>10.4f} {m['recall']:>8.4f} "
            f"{m['unseen_f1']:>10.4f} {m['coverage']:>9.2f} {m['budget_used']:>7.1f}"
        )


def cmd_report(args) -> int:
    report = load_report_json(args.json)
    strategies = report.config.get("strategies") or sorted(report.means)
    _print_means(report.means, [s for s in strategies if s in report.means])
    if args.rows:
        print()
        for r in report.rows:
            print(
                f"seed {r.seed:>3} {r.strategy:<10} f1={r.f1:.4f} unseen={r.unseen_f1:.4f} "
                f"coverage={r.coverage} budget={r.budget_used}"
            )
    return 0


def cmd_serve(args) -> int:
    cfg = load_config(args.config)["service"]
    from .service import run_service

    run_service(
        args.store or cfg["store"],
        host=args.host or cfg["host"],
        port=args.port if args.port is not None else cfg["port"],
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="supercd",
        description="Active-learning pipeline for few-shot entity typing: "
        "superposition queries, dense retrieval, budgeted annotation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", default=None, help="TOML config file")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("gen-ontology", help="generate a seeded concept DAG")
    add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--concepts", type=int, default=None)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--branch-min", type=int, default=None)
    p.add_argument("--branch-max", type=int, default=None)
    p.add_argument("--extra-parent-prob", type=float, default=None)
    p.set_defaults(func=cmd_gen_ontology)

    p = sub.add_parser("gen-corpus", help="generate a synthetic mention corpus")
    add_common(p)
    p.add_argument("--ontology", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ontology-out", default=None, help="write the frequency-attached ontology here")
    p.add_argument("--sentences", type=int, default=None)
    p.add_argument("--zipf-s", type=float, default=None)
    p.add_argument("--sig-tokens", type=int, default=None)
    p.add_argument("--noise-sigma", type=float, default=None)
    p.add_argument("--dim", type=int, default=None, help="mention feature dimension")
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("build-sir-data", help="mine contrastive retriever training pairs")
    add_common(p)
    p.add_argument("--ontology", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pairs", type=int, default=None)
    p.add_argument("--neg-excluded", type=int, default=None)
    p.add_argument("--neg-random", type=int, default=None)
    p.add_argument("--max-included", type=int, default=None)
    p.set_defaults(func=cmd_build_sir_data)

    p = sub.add_parser("train-sir", help="train the dense retriever")
    add_common(p)
    p.add_argument("--ontology", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--data", required=True, help="training pairs from build-sir-data")
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--init-scale", type=float, default=None)
    p.set_defaults(func=cmd_train_sir)

    p = sub.add_parser("train-ce", help="train the learned concept extractor")
    add_common(p)
    p.add_argument("--ontology", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sample", type=int, default=None, help="max sentences to train on")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--l2", type=float, default=None)
    p.set_defaults(func=cmd_train_ce)

    p = sub.add_parser("run-experiment", help="run the benchmark grid or open human sessions")
    add_common(p)
    p.add_argument("--ontology", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--retriever", required=True)
    p.add_argument("--out-dir", default="experiment")
    p.add_argument("--annotator", choices=["oracle", "human"], default=None)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--shots", type=int, default=None)
    p.add_argument("--seeds", type=int, default=None, help="number of seeds")
    p.add_argument("--strategies", default=None, help="comma-separated strategy list")
    p.add_argument("--types", type=int, default=None, help="number of target types")
    p.add_argument("--skew", type=float, default=None)
    p.add_argument("--pool-fraction", type=float, default=None)
    p.add_argument("--base-seed", type=int, default=None)
    p.add_argument("--store", default=None, help="session store for human mode")
    p.set_defaults(func=cmd_run_experiment)

    p = sub.add_parser("report", help="print a saved benchmark report")
    p.add_argument("--json", required=True, help="report.json from run-experiment")
    p.add_argument("--rows", action="store_true", help="also print per-seed rows")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="start the annotation service")
    p.add_argument("--config", default=None)
    p.add_argument("--store", default=None)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SupercdError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
