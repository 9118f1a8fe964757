"""Taxonomy queries: closure, siblings, descendants, satisfies, validation."""

from __future__ import annotations

from functools import lru_cache

import pytest
from hypothesis import given
from hypothesis import strategies as st

from supercd.errors import UnknownConceptError
from supercd.ontology import (
    Concept,
    Ontology,
    SuperpositionQuery,
    load_ontology,
    save_ontology,
)
from supercd.synth import gen_ontology

from conftest import ONT_A_CONCEPTS, ONT_A_EDGES, make_ont_a

ONT_A_IDS = [cid for cid, _ in ONT_A_CONCEPTS]


class TestClosure:
    def test_multi_parent_leaf(self, ont_a):
        """University sits under both EduIns and ResIns; the closure walks both."""
        assert ont_a.closure({"University"}) == {
            "University",
            "EduIns",
            "ResIns",
            "Organization",
            "Entity",
        }

    def test_root_is_a_fixpoint(self, ont_a):
        assert ont_a.closure({"Entity"}) == {"Entity"}

    def test_empty_input(self, ont_a):
        assert ont_a.closure(set()) == frozenset()

    def test_unknown_concept_rejected(self, ont_a):
        with pytest.raises(UnknownConceptError):
            ont_a.closure({"Nonexistent"})

    @given(st.sets(st.sampled_from(ONT_A_IDS)))
    def test_contains_input_and_idempotent(self, direct):
        ont = make_ont_a()
        once = ont.closure(direct)
        assert once >= frozenset(direct)
        assert ont.closure(once) == once


class TestSiblings:
    def test_shared_parent_leaf(self, ont_a):
        assert ont_a.siblings("HighSchool") == {"University"}

    def test_mid_level(self, ont_a):
        assert ont_a.siblings("SportsOrg") == {"EduIns", "ResIns"}

    def test_root_has_none(self, ont_a):
        assert ont_a.siblings("Entity") == frozenset()

    def test_never_contains_self(self, ont_a):
        for cid in ont_a.ids():
            assert cid not in ont_a.siblings(cid)

    def test_every_sibling_shares_a_parent(self, ont_a):
        for cid in ont_a.ids():
            mine = set(ont_a.parents(cid))
            for sib in ont_a.siblings(cid):
                assert mine & set(ont_a.parents(sib))


class TestDescendants:
    def test_subtree(self, ont_a):
        assert ont_a.descendants("EduIns") == {"University", "HighSchool"}

    def test_leaf_is_empty(self, ont_a):
        assert ont_a.descendants("University") == frozenset()

    def test_root_covers_everything_else(self, ont_a):
        assert ont_a.descendants("Entity") == set(ont_a.ids()) - {"Entity"}


class TestSatisfies:
    def test_included_without_excluded(self, ont_a):
        q = SuperpositionQuery(excluded="University", included=("EduIns",))
        assert ont_a.satisfies({"HighSchool"}, q) is True

    def test_excluded_ancestor_blocks(self, ont_a):
        q = SuperpositionQuery(excluded="EduIns", included=("ResIns",))
        assert ont_a.satisfies({"University"}, q) is False

    def test_excluded_direct_concept_blocks(self, ont_a):
        q = SuperpositionQuery(excluded="SportsOrg", included=("Organization",))
        assert ont_a.satisfies({"SportsOrg"}, q) is False

    @given(
        st.sets(st.sampled_from(ONT_A_IDS), min_size=1),
        st.sampled_from(ONT_A_IDS),
        st.sampled_from(ONT_A_IDS),
    )
    def test_false_whenever_excluded_in_closure(self, direct, excluded, included):
        """Elimination is absolute: a closure containing the excluded concept never matches."""
        if excluded == included:
            return
        ont = make_ont_a()
        q = SuperpositionQuery(excluded=excluded, included=(included,))
        if excluded in ont.closure(direct):
            assert ont.satisfies(direct, q) is False


class TestQueryType:
    def test_needs_included(self):
        with pytest.raises(ValueError):
            SuperpositionQuery(excluded="A", included=())

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            SuperpositionQuery(excluded="A", included=("B", "B"))

    def test_rejects_excluded_among_included(self):
        with pytest.raises(ValueError):
            SuperpositionQuery(excluded="A", included=("B", "A"))


class TestValidate:
    def test_fixture_is_valid(self, ont_a):
        report = ont_a.validate()
        assert report.ok and not report.issues

    def test_cycle_reported_with_path(self):
        concepts = [Concept(cid, name) for cid, name in ONT_A_CONCEPTS]
        edges = list(ONT_A_EDGES) + [("Entity", "University")]
        report = Ontology(concepts, edges).validate()
        assert not report.ok
        cycle_issues = [msg for msg in report.issues if msg.startswith("cycle:")]
        assert cycle_issues
        # The reported path must name nodes actually on the loop.
        assert "Entity" in cycle_issues[0] and "University" in cycle_issues[0]

    def test_multiple_roots_reported(self):
        concepts = [Concept(cid, name) for cid, name in ONT_A_CONCEPTS]
        edges = [(c, p) for c, p in ONT_A_EDGES if c != "Organization"]
        report = Ontology(concepts, edges).validate()
        assert not report.ok
        assert any("multiple roots" in msg for msg in report.issues)

    def test_dangling_edge_reported(self, ont_a):
        concepts = [Concept(cid, name) for cid, name in ONT_A_CONCEPTS]
        edges = list(ONT_A_EDGES) + [("Ghost", "Entity")]
        report = Ontology(concepts, edges).validate()
        assert any("dangling" in msg for msg in report.issues)

    @given(st.integers(min_value=0, max_value=10_000))
    def test_accepts_generated_taxonomies(self, seed):
        assert _generated(seed).validate().ok


@lru_cache(maxsize=None)
def _generated(seed: int) -> Ontology:
    return gen_ontology(
        n_concepts=25, depth=4, branching_range=(2, 3), extra_parent_prob=0.2, seed=seed
    )


class TestGeneratedGraphProperties:
    @given(st.integers(min_value=0, max_value=500), st.data())
    def test_closure_monotone_and_idempotent(self, seed, data):
        ont = _generated(seed)
        direct = data.draw(st.sets(st.sampled_from(ont.ids()), max_size=4))
        once = ont.closure(direct)
        assert once >= frozenset(direct)
        assert ont.closure(once) == once

    @given(st.integers(min_value=0, max_value=500))
    def test_single_root_reaches_everything(self, seed):
        ont = _generated(seed)
        root = ont.root_id
        for cid in ont.ids():
            assert root in ont.closure({cid})


class TestAccessors:
    def test_lookup_errors(self, ont_a):
        with pytest.raises(UnknownConceptError):
            ont_a.concept("Nope")
        with pytest.raises(UnknownConceptError):
            ont_a.siblings("Nope")

    def test_root_id(self, ont_a):
        assert ont_a.root_id == "Entity"
        assert ont_a.roots() == ["Entity"]

    def test_with_frequencies(self, ont_a):
        bumped = ont_a.with_frequencies({"EduIns": 7})
        assert bumped.concept("EduIns").corpus_frequency == 7
        assert ont_a.concept("EduIns").corpus_frequency == 0

    def test_len_contains(self, ont_a):
        assert len(ont_a) == 8
        assert "University" in ont_a and "Nope" not in ont_a


class TestPersistence:
    def test_round_trip(self, ont_a, tmp_path):
        path = tmp_path / "ont.jsonl"
        save_ontology(ont_a, path)
        loaded = load_ontology(path)
        assert loaded.ids() == ont_a.ids()
        assert loaded.edges() == ont_a.edges()
        assert [c.name for c in loaded.concepts()] == [c.name for c in ont_a.concepts()]

    def test_save_is_stable(self, ont_a, tmp_path):
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_ontology(ont_a, p1)
        save_ontology(load_ontology(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()
