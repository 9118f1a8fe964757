"""Few-shot classifier, selection baselines, benchmark grid, report files."""

from __future__ import annotations

import numpy as np
import pytest

from supercd.errors import DataError, ParameterError
from supercd.fsner import (
    BaselineContext,
    BenchmarkConfig,
    BenchmarkReport,
    ReportRow,
    SpanClassifier,
    baseline_select,
    default_task_specs,
    derive_seed,
    evaluate,
    load_report_json,
    run_benchmark,
    train_classifier,
    write_report_csv,
    write_report_json,
)
from supercd.synth import Instance, Mention


def _labeled(pairs: list[tuple[list[float], bool]]) -> list[tuple[np.ndarray, bool]]:
    return [(np.asarray(f, dtype=np.float64), lab) for f, lab in pairs]


def _feat_instance(iid: str, feature: list[float]) -> Instance:
    mention = Mention(
        span=(0, 1), direct_concepts=frozenset({"X"}), feature=np.asarray(feature, dtype=np.float64)
    )
    return Instance(id=iid, tokens=[iid, "said"], mentions=[mention])


class TestDeriveSeed:
    def test_stable_across_calls(self):
        assert derive_seed(0, "task", 1, 2) == derive_seed(0, "task", 1, 2)

    def test_part_order_matters(self):
        assert derive_seed("a", "b") != derive_seed("b", "a")

    def test_distinct_labels_decorrelate(self):
        seeds = {derive_seed(0, "cell", s, 0, 0) for s in ("random", "kmeans", "entropy")}
        assert len(seeds) == 3

    def test_fits_in_a_nonnegative_int64(self):
        s = derive_seed("anything", 123)
        assert 0 <= s < 2**63


class TestTrainClassifier:
    def test_separable_data_is_fit_perfectly(self):
        labeled = _labeled([([2.0], True)] * 10 + [([-2.0], False)] * 10)
        clf = train_classifier(labeled)
        assert clf.degenerate is None
        feats = np.array([[3.0], [-3.0], [2.0], [-2.0]])
        assert clf.predict(feats).tolist() == [True, False, True, False]

    def test_all_positive_short_circuits_to_constant_true(self):
        clf = train_classifier(_labeled([([1.0, 0.0], True), ([0.0, 1.0], True)]))
        assert clf.degenerate is True
        assert clf.predict_proba(np.array([[99.0, -99.0]])).tolist() == [1.0]
        assert clf.predict(np.array([[99.0, -99.0]])).tolist() == [True]

    def test_all_negative_short_circuits_to_constant_false(self):
        clf = train_classifier(_labeled([([1.0], False), ([2.0], False)]))
        assert clf.degenerate is False
        assert clf.predict_proba(np.array([[0.0]])).tolist() == [0.0]

    def test_contradictory_labels_sit_on_the_boundary(self):
        # The same feature labeled both ways: the optimum is indifference, and
        # the strict 0.5 threshold resolves indifference to negative.
        labeled = _labeled([([1.0, 2.0], True), ([1.0, 2.0], False)] * 5)
        clf = train_classifier(labeled)
        proba = clf.predict_proba(np.array([[1.0, 2.0]]))
        assert proba[0] == pytest.approx(0.5, abs=1e-6)
        assert clf.predict(np.array([[1.0, 2.0]])).tolist() == [False]

    def test_empty_input_rejected(self):
        with pytest.raises(DataError):
            train_classifier([])


class TestEvaluate:
    def test_perfect_predictions_score_one(self):
        labeled = _labeled([([2.0], True)] * 5 + [([-2.0], False)] * 5)
        clf = train_classifier(labeled)
        result = evaluate(clf, labeled)
        assert result.micro_f1 == 1.0
        assert (result.tp, result.fp, result.fn) == (5, 0, 0)
        assert result.precision == 1.0 and result.recall == 1.0

    def test_nothing_predicted_scores_zero_not_nan(self):
        clf = SpanClassifier(w=np.zeros(1), b=0.0, degenerate=False)
        result = evaluate(clf, _labeled([([1.0], True), ([2.0], True)]))
        assert result.micro_f1 == 0.0
        assert result.precision == 0.0 and result.recall == 0.0
        assert (result.tp, result.fp, result.fn) == (0, 0, 2)

    def test_balanced_errors_give_one_half(self):
        clf = SpanClassifier(w=np.array([1.0]), b=0.0)
        test = _labeled([([1.0], True), ([1.0], False), ([-1.0], True), ([-1.0], False)])
        result = evaluate(clf, test)
        assert (result.tp, result.fp, result.fn) == (1, 1, 1)
        assert result.micro_f1 == pytest.approx(0.5)
        assert result.precision == pytest.approx(0.5)
        assert result.recall == pytest.approx(0.5)

    def test_boundary_probability_counts_as_negative(self):
        clf = SpanClassifier(w=np.zeros(1), b=0.0)
        assert clf.predict_proba(np.array([[7.0]]))[0] == 0.5
        result = evaluate(clf, _labeled([([7.0], True)]))
        assert (result.tp, result.fn) == (0, 1)

    def test_order_invariance(self):
        clf = SpanClassifier(w=np.array([1.0]), b=-0.2)
        test = _labeled([([1.0], True), ([-1.0], False), ([0.4], True), ([0.1], False)])
        assert evaluate(clf, test) == evaluate(clf, list(reversed(test)))

    def test_empty_test_set_rejected(self):
        with pytest.raises(DataError):
            evaluate(SpanClassifier(w=np.zeros(1), b=0.0), [])


class TestBaselineSelect:
    def _pool(self) -> list[Instance]:
        return [_feat_instance(f"p-{i}", [float(i), 0.0]) for i in range(8)]

    def test_random_is_seeded_and_within_pool(self):
        pool = self._pool()
        a = baseline_select("random", pool, 3, BaselineContext(seed=4))
        b = baseline_select("random", pool, 3, BaselineContext(seed=4))
        assert a == b
        assert len(a) == 3 and len(set(a)) == 3
        assert set(a) <= {inst.id for inst in pool}

    def test_kmeans_takes_one_instance_per_cluster(self):
        near = [[0.0, 0.0], [0.1, 0.0], [0.0, 0.1]]
        far = [[10.0, 10.0], [10.1, 10.0], [10.0, 9.9]]
        pool = [_feat_instance(f"a-{i}", f) for i, f in enumerate(near)] + [
            _feat_instance(f"b-{i}", f) for i, f in enumerate(far)
        ]
        picks = baseline_select("kmeans", pool, 2, BaselineContext(seed=1))
        assert len(picks) == 2
        assert {iid[0] for iid in picks} == {"a", "b"}

    def test_entropy_prefers_the_decision_boundary(self):
        illustrative = _labeled([([-2.0], False)] * 3 + [([2.0], True)] * 3)
        pool = [
            _feat_instance("p-far-neg", [-5.0]),
            _feat_instance("p-mid", [0.0]),
            _feat_instance("p-far-pos", [5.0]),
        ]
        context = BaselineContext(seed=0, illustrative=illustrative)
        assert baseline_select("entropy", pool, 1, context) == ["p-mid"]

    def test_entropy_without_illustrative_rejected(self):
        with pytest.raises(ParameterError):
            baseline_select("entropy", self._pool(), 1, BaselineContext(seed=0))

    def test_budget_clamped_to_pool_with_warning(self):
        pool = self._pool()[:3]
        with pytest.warns(UserWarning, match="clamping"):
            picks = baseline_select("random", pool, 5, BaselineContext(seed=0))
        assert sorted(picks) == sorted(inst.id for inst in pool)

    def test_budget_zero_selects_nothing(self):
        assert baseline_select("random", self._pool(), 0, BaselineContext(seed=0)) == []

    def test_negative_budget_rejected(self):
        with pytest.raises(ParameterError):
            baseline_select("random", self._pool(), -1, BaselineContext(seed=0))

    def test_unknown_strategy_rejected(self):
        with pytest.raises(ParameterError):
            baseline_select("osmosis", self._pool(), 1, BaselineContext(seed=0))


class TestDefaultTaskSpecs:
    def test_targets_are_disjoint_internal_subtrees(self, small_world):
        view = small_world.view
        specs = default_task_specs(view, n_types=3, k=5, skew=1.0, seed=0)
        assert len(specs) == 3
        subtrees = []
        for spec in specs:
            assert spec.k == 5 and spec.skew == 1.0
            (target,) = spec.target_concepts
            assert target != view.root_id
            assert view.children(target), "target must be an internal concept"
            leaves = {d for d in view.descendants(target) if not view.children(d)}
            assert len(leaves) >= 2
            assert spec.illustrative_source in leaves
            assert view.concept(spec.illustrative_source).corpus_frequency >= 8
            subtrees.append({target} | view.descendants(target))
        for i in range(len(subtrees)):
            for j in range(i + 1, len(subtrees)):
                assert not (subtrees[i] & subtrees[j])

    def test_deterministic_in_seed(self, small_world):
        a = default_task_specs(small_world.view, n_types=2, k=5, skew=1.0, seed=3)
        b = default_task_specs(small_world.view, n_types=2, k=5, skew=1.0, seed=3)
        assert a == b

    def test_without_frequencies_nothing_is_eligible(self, small_world):
        with pytest.raises(DataError):
            default_task_specs(small_world.ontology, n_types=1, k=5, skew=1.0, seed=0)

    def test_impossible_type_count_rejected(self, small_world):
        with pytest.raises(DataError):
            default_task_specs(small_world.view, n_types=500, k=5, skew=1.0, seed=0)


@pytest.fixture(scope="module")
def small_report(small_world, small_retriever) -> BenchmarkReport:
    specs = default_task_specs(small_world.view, n_types=1, k=5, skew=1.0, seed=0)
    config = BenchmarkConfig(retriever=small_retriever.model, budget=3, base_seed=0)
    return run_benchmark(
        small_world.corpus,
        small_world.view,
        specs,
        ["vanilla", "random", "kmeans", "entropy", "supercd"],
        n_seeds=2,
        config=config,
    )


class TestRunBenchmark:
    def test_grid_has_one_row_per_seed_and_strategy(self, small_report):
        assert len(small_report.rows) == 2 * 5
        cells = {(r.seed, r.strategy) for r in small_report.rows}
        assert cells == {(s, st) for s in (0, 1) for st in small_report.config["strategies"]}

    def test_vanilla_spends_no_budget(self, small_report):
        for row in small_report.rows:
            if row.strategy == "vanilla":
                assert row.budget_used == 0 and row.coverage == 0
            else:
                assert row.budget_used == 3

    def test_metrics_are_valid(self, small_report):
        for row in small_report.rows:
            for value in (row.f1, row.precision, row.recall, row.unseen_f1):
                assert 0.0 <= value <= 1.0
            assert row.coverage >= 0

    def test_means_match_the_rows(self, small_report):
        for strategy in small_report.config["strategies"]:
            cells = [r for r in small_report.rows if r.strategy == strategy]
            assert small_report.mean(strategy) == pytest.approx(
                float(np.mean([r.f1 for r in cells]))
            )
            assert small_report.mean(strategy, "coverage") == pytest.approx(
                float(np.mean([r.coverage for r in cells]))
            )

    def test_config_echo(self, small_report):
        echo = small_report.config
        assert echo["budget"] == 3 and echo["n_seeds"] == 2 and echo["n_types"] == 1
        assert echo["strategies"] == ["vanilla", "random", "kmeans", "entropy", "supercd"]

    def test_budget_zero_collapses_every_strategy_to_vanilla(
        self, small_world, small_retriever
    ):
        specs = default_task_specs(small_world.view, n_types=1, k=5, skew=1.0, seed=0)
        config = BenchmarkConfig(retriever=small_retriever.model, budget=0, base_seed=0)
        report = run_benchmark(
            small_world.corpus,
            small_world.view,
            specs,
            ["vanilla", "random", "supercd"],
            n_seeds=1,
            config=config,
        )
        f1s = {r.strategy: r.f1 for r in report.rows}
        assert f1s["random"] == f1s["vanilla"]
        assert f1s["supercd"] == f1s["vanilla"]

    def test_repeated_runs_are_identical(self, small_world, small_retriever, small_report):
        specs = default_task_specs(small_world.view, n_types=1, k=5, skew=1.0, seed=0)
        config = BenchmarkConfig(retriever=small_retriever.model, budget=3, base_seed=0)
        again = run_benchmark(
            small_world.corpus,
            small_world.view,
            specs,
            ["vanilla", "random", "kmeans", "entropy", "supercd"],
            n_seeds=2,
            config=config,
        )
        assert again.rows == small_report.rows
        assert again.means == small_report.means

    def test_required_strategies_enforced(self, small_world, small_retriever):
        specs = default_task_specs(small_world.view, n_types=1, k=5, skew=1.0, seed=0)
        config = BenchmarkConfig(retriever=small_retriever.model)
        with pytest.raises(ParameterError, match="random"):
            run_benchmark(
                small_world.corpus, small_world.view, specs, ["vanilla", "supercd"], 1, config
            )
        with pytest.raises(ParameterError, match="unknown strategy"):
            run_benchmark(
                small_world.corpus,
                small_world.view,
                specs,
                ["vanilla", "random", "supercd", "osmosis"],
                1,
                config,
            )

    def test_degenerate_grid_parameters_rejected(self, small_world, small_retriever):
        specs = default_task_specs(small_world.view, n_types=1, k=5, skew=1.0, seed=0)
        config = BenchmarkConfig(retriever=small_retriever.model)
        with pytest.raises(ParameterError):
            run_benchmark(
                small_world.corpus, small_world.view, specs,
                ["vanilla", "random", "supercd"], 0, config,
            )
        with pytest.raises(ParameterError):
            run_benchmark(
                small_world.corpus, small_world.view, [],
                ["vanilla", "random", "supercd"], 1, config,
            )


class TestReportFiles:
    def test_json_round_trip(self, small_report, tmp_path):
        path = tmp_path / "report.json"
        write_report_json(small_report, path)
        loaded = load_report_json(path)
        assert loaded.rows == small_report.rows
        assert loaded.means == small_report.means
        assert loaded.config == small_report.config

    def test_csv_layout(self, small_report, tmp_path):
        path = tmp_path / "report.csv"
        write_report_csv(small_report, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "seed,strategy,f1,precision,recall,unseen_f1,coverage,budget_used"
        assert len(lines) == 1 + len(small_report.rows)
        first = lines[1].split(",")
        assert first[0] == "0" and first[1] == small_report.rows[0].strategy
        assert first[2] == f"{small_report.rows[0].f1:.6f}"

    def test_handwritten_report_round_trips(self, tmp_path):
        rows = [
            ReportRow(
                seed=0, strategy="vanilla", f1=0.25, precision=0.5, recall=1 / 6,
                unseen_f1=0.0, coverage=0, budget_used=0,
            ),
            ReportRow(
                seed=0, strategy="supercd", f1=0.75, precision=0.75, recall=0.75,
                unseen_f1=0.5, coverage=4, budget_used=5,
            ),
        ]
        report = BenchmarkReport(
            rows=rows,
            means={"vanilla": {"f1": 0.25}, "supercd": {"f1": 0.75}},
            config={"budget": 5},
        )
        path = tmp_path / "tiny.json"
        write_report_json(report, path)
        loaded = load_report_json(path)
        assert loaded.rows == rows
        assert loaded.mean("supercd") == 0.75
        assert loaded.config == {"budget": 5}
