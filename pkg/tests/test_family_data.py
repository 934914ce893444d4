# test_family_data.py
from collections import Counter
from fractions import Fraction

import pytest

from family_data import (
    ENTITY_COUNT,
    FACTS_PER_FAMILY,
    MAIN_INDICES,
    DEFAULT_P_GRID,
    PUBLISHED_SPLIT_SIZES,
    RELATION_INDEX,
    RELATIONS,
    FamilySplit,
    FamilySplitKind,
    FamilyTree,
    KinshipIndex,
    Sex,
    build_family_dataset,
    dump_tree,
    family_of,
    family_vocab,
    generate_families,
    generate_family,
    label_kinship,
    swap_sexes,
    to_dot,
)
from kg_core import InvalidArgument
from logic_oracle import FAMILY_EXHAUSTIVE_RULES, FAMILY_RULES, forward_chain, load_rules

COUNTERPARTS = [
    ("father", "mother"),
    ("husband", "wife"),
    ("son", "daughter"),
    ("brother", "sister"),
    ("uncle", "aunt"),
    ("nephew", "niece"),
    ("grandfather", "grandmother"),
    ("grandson", "granddaughter"),
    ("cousin", "cousin"),
]


@pytest.fixture(scope="module")
def trees():
    return generate_families(seed=7)


def _positives(facts):
    return {(RELATIONS[f.relation], f.subject, f.object) for f in facts if f.label == 1}


class TestTrees:
    def test_shape(self, trees):
        assert [t.family for t in trees] == [1, 2, 3, 4, 5]
        for t in trees:
            assert len(t.persons) == 23
            by_gen = Counter(p.generation for p in t.persons)
            assert by_gen == {1: 8, 2: 6, 3: 9}
            assert all(family_of(p.id) == t.family for p in t.persons)
            for p in t.persons:
                if p.spouse is not None:
                    assert t.person(p.spouse).spouse == p.id
                    assert t.person(p.spouse).sex is p.sex.opposite()

    def test_deterministic(self):
        assert generate_family(2, seed=3) == generate_family(2, seed=3)
        assert generate_families(seed=3) != generate_families(seed=4)

    def test_validation(self, trees):
        t = trees[0]
        with pytest.raises(InvalidArgument):
            FamilyTree(family=1, persons=t.persons[:-1])
        with pytest.raises(InvalidArgument):
            generate_family(0, seed=0)

    def test_dumps(self, trees):
        text = dump_tree(trees[0])
        assert len(text.splitlines()) == 24
        dot = to_dot(trees[0])
        assert dot.startswith("digraph family1 {")
        assert dot.count("->") == 7 + 2 * 15


class TestKinship:
    def test_fact_counts(self, trees):
        facts = label_kinship(trees[0])
        assert len(facts) == FACTS_PER_FAMILY == 8993
        pos = Counter(RELATIONS[f.relation] for f in facts if f.label == 1)
        assert pos["father"] == pos["mother"] == 15
        assert pos["son"] + pos["daughter"] == 30
        assert pos["husband"] + pos["wife"] == 14
        assert pos["cousin"] == 54

    def test_irreflexive_and_exclusive(self, trees):
        for t in trees:
            per_pair = Counter()
            for f in label_kinship(t):
                if f.label == 1:
                    assert f.subject != f.object
                    per_pair[(f.subject, f.object)] += 1
            assert max(per_pair.values()) == 1

    def test_subject_sex(self, trees):
        t = trees[2]
        for f in label_kinship(t):
            if f.label == 1 and RELATIONS[f.relation] in ("father", "son", "brother", "uncle"):
                assert t.person(f.subject).sex is Sex.MALE

    def test_swapping_sexes_swaps_relations(self, trees):
        for t in trees:
            a = _positives(label_kinship(t))
            b = _positives(label_kinship(swap_sexes(t)))
            for male, female in COUNTERPARTS:
                assert {(s, o) for r, s, o in a if r == male} == {(s, o) for r, s, o in b if r == female}

    def test_example_rules_hold(self, trees):
        rules = load_rules(FAMILY_RULES)
        assert len(rules) == 13
        for t in trees:
            facts = label_kinship(t)
            pos = _positives(facts)
            main = {x for x in pos if RELATION_INDEX[x[0]] in MAIN_INDICES}
            assert forward_chain(rules, main) <= pos

    def test_other_relations_follow_from_main(self, trees):
        rules = load_rules(FAMILY_EXHAUSTIVE_RULES)
        for t in trees:
            pos = _positives(label_kinship(t))
            main = {x for x in pos if RELATION_INDEX[x[0]] in MAIN_INDICES}
            derived = {x for x in forward_chain(rules, main) if x[0] in RELATION_INDEX}
            assert derived == pos

    def test_spouses_inferred_from_children(self, trees):
        t = trees[1]
        full = KinshipIndex.from_tree(t)
        inferred = KinshipIndex(full.sex, full.father, full.mother)
        assert inferred.spouse == full.spouse

    def test_unknown_relation(self, trees):
        with pytest.raises(InvalidArgument):
            KinshipIndex.from_tree(trees[0]).holds("godfather", 0, 1)


class TestSplits:
    def test_vocab(self):
        vocab = family_vocab()
        assert vocab.entity_count == ENTITY_COUNT == 115
        assert vocab.relation_names == RELATIONS
        assert vocab.entity_name(23) == "f2_p00"

    def test_split_validation(self):
        FamilySplit("family", 0)
        with pytest.raises(InvalidArgument):
            FamilySplit("random", 0)
        with pytest.raises(InvalidArgument):
            FamilySplit("evidence", "0.95")
        with pytest.raises(ValueError):
            FamilySplit("cousins", "0.8")

    @pytest.mark.parametrize("p", DEFAULT_P_GRID, ids=str)
    def test_random_sizes(self, trees, p):
        ds = build_family_dataset(FamilySplit(FamilySplitKind.RANDOM, p), seed=7, trees=trees)
        sampled, valid = PUBLISHED_SPLIT_SIZES[(FamilySplitKind.RANDOM, p)]
        assert ds.sizes() == (sampled, valid, 44965 - sampled - valid)

    @pytest.mark.parametrize("p", DEFAULT_P_GRID, ids=str)
    def test_evidence_sizes(self, trees, p):
        ds = build_family_dataset(FamilySplit(FamilySplitKind.EVIDENCE, p), seed=7, trees=trees)
        sampled, valid = PUBLISHED_SPLIT_SIZES[(FamilySplitKind.EVIDENCE, p)]
        assert ds.sizes() == (10580 + sampled, valid, 34385 - sampled - valid)
        assert sum(1 for f in ds.train if f.relation in MAIN_INDICES) == 10580
        assert all(f.relation not in MAIN_INDICES for f in ds.valid + ds.test)

    @pytest.mark.parametrize("p", DEFAULT_P_GRID + (Fraction(0),), ids=str)
    def test_family_sizes(self, trees, p):
        ds = build_family_dataset(FamilySplit(FamilySplitKind.FAMILY, p), seed=7, trees=trees)
        sampled, valid = PUBLISHED_SPLIT_SIZES[(FamilySplitKind.FAMILY, p)]
        assert ds.sizes() == (38088 + sampled, valid, 6877 - sampled - valid)
        for f in ds.valid + ds.test:
            assert family_of(f.subject) == 5 and f.relation not in MAIN_INDICES

    def test_family_split_without_sampling(self, trees):
        ds = build_family_dataset(FamilySplit("family", 0), seed=7, trees=trees)
        assert ds.sizes() == (38088, 688, 6189)

    def test_positive_labels_in_test(self, trees):
        ds = build_family_dataset(FamilySplit("family", "0.1"), seed=7, trees=trees)
        assert any(f.label == 1 for f in ds.test)

    def test_cross_family_facts_never_appear(self, trees):
        ds = build_family_dataset(FamilySplit("random", "0.8"), seed=7, trees=trees)
        assert all(family_of(f.subject) == family_of(f.object) for f in ds.all_facts)

    def test_split_is_seeded(self, trees):
        split = FamilySplit("evidence", "0.4")
        a = build_family_dataset(split, seed=7, trees=trees)
        b = build_family_dataset(split, seed=7, trees=trees)
        c = build_family_dataset(split, seed=8, trees=trees)
        assert a == b
        assert a.test != c.test
