# test_kg_core.py
import itertools
from fractions import Fraction

import numpy as np
import pytest
from sklearn.metrics import average_precision_score

from kg_core import (
    ENTITIES_FILE,
    RELATIONS_FILE,
    Dataset,
    InvalidArgument,
    LabeledFact,
    SplitKind,
    SplitSpec,
    UndefinedMetric,
    Vocab,
    aggregate_runs,
    average_precision,
    ceil_count,
    derive_seed,
    load_dataset,
    make_fact,
    read_facts,
    read_vocab,
    sample_subset,
    save_dataset,
    split_by_counts,
    three_way_split,
    to_fraction,
    write_facts,
)


def _facts(n):
    return [LabeledFact(0, i, (i * 7) % n, 1 if i % 3 == 0 else -1) for i in range(n)]


class TestSeeds:
    def test_deterministic_and_bounded(self):
        a = derive_seed(42, "family", 3)
        assert a == derive_seed(42, "family", 3)
        assert 0 <= a < 2 ** 63

    def test_parts_matter(self):
        assert derive_seed(42, "family", 3) != derive_seed(42, "family", 4)
        assert derive_seed(42, "a") != derive_seed(43, "a")


class TestFractions:
    def test_decimal_strings_are_exact(self):
        assert to_fraction(0.1) == Fraction(1, 10)
        assert to_fraction("0.8") == Fraction(4, 5)

    def test_ceil_counts(self):
        assert ceil_count(0.1, 44965) == 4497
        assert ceil_count(0.8, 2500) == 2000
        assert ceil_count(0, 100) == 0

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidArgument):
            to_fraction(float("nan"))


class TestSampling:
    def test_subset_size_is_ceiling(self):
        facts = _facts(101)
        sub = sample_subset(facts, 0.3, seed=1)
        assert len(sub) == 31
        assert set(sub) <= set(facts)

    def test_subset_is_deterministic_and_order_free(self):
        facts = _facts(50)
        assert sample_subset(facts, 0.5, 9) == sample_subset(list(reversed(facts)), 0.5, 9)

    def test_split_by_counts_partitions(self):
        facts = _facts(40)
        tr, va, te = split_by_counts(facts, 30, 4, seed=3)
        assert (len(tr), len(va), len(te)) == (30, 4, 6)
        assert set(tr) | set(va) | set(te) == set(facts)
        assert not (set(tr) & set(va) or set(tr) & set(te) or set(va) & set(te))

    def test_split_by_counts_rejects_overdraw(self):
        with pytest.raises(InvalidArgument):
            split_by_counts(_facts(10), 8, 3, seed=0)

    def test_three_way_clamps_validation(self):
        tr, va, te = three_way_split(_facts(10), "0.91", "0.09", seed=0)
        assert (len(tr), len(va), len(te)) == (10, 0, 0)

    def test_three_way_sizes(self):
        assert [len(x) for x in three_way_split(_facts(100), "0.8", "0.1", seed=0)] == [80, 10, 10]
        assert [len(x) for x in three_way_split(_facts(8993), "0.8", "0.1", seed=0)] == [7195, 900, 898]
        assert [len(x) for x in three_way_split(_facts(50), 1, 0, seed=0)] == [50, 0, 0]

    def test_different_seeds_differ(self):
        facts = _facts(200)
        assert sample_subset(facts, 0.5, 1) != sample_subset(facts, 0.5, 2)

    def test_three_way_rejects_bad_fractions(self):
        with pytest.raises(InvalidArgument):
            three_way_split(_facts(10), 0.8, 0.3, seed=0)


class TestAveragePrecision:
    def test_hand_example(self):
        ap = average_precision([(0.9, 1), (0.8, -1), (0.7, 1)])
        assert ap == pytest.approx((1.0 + 2.0 / 3.0) / 2.0)

    def test_perfect_ranking(self):
        assert average_precision([(3.0, 1), (2.0, 1), (1.0, -1)]) == 1.0

    def test_positives_ranked_last(self):
        assert average_precision([(3.0, -1), (2.0, 1), (1.0, 1)]) == pytest.approx(7.0 / 12.0)

    def test_ties_match_explicit_permutation(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            scores = rng.integers(0, 3, size=8).astype(float)
            labels = np.where(rng.random(8) < 0.5, 1, -1)
            labels[0] = 1
            cells = rng.permutation(64)[:8]
            keys = [(0, int(c) // 8, int(c) % 8) for c in cells]
            order = sorted(range(8), key=lambda i: (-scores[i], keys[i]))
            hits, total = 0, 0.0
            for rank, i in enumerate(order, start=1):
                if labels[i] == 1:
                    hits += 1
                    total += hits / rank
            expected = total / hits
            assert average_precision(list(zip(scores, labels)), keys=keys) == pytest.approx(expected)

    def test_undefined_cases(self):
        with pytest.raises(UndefinedMetric):
            average_precision([])
        with pytest.raises(UndefinedMetric):
            average_precision([(0.3, -1), (0.1, -1)])
        with pytest.raises(InvalidArgument):
            average_precision([(float("nan"), 1)])

    def test_ties_follow_keys(self):
        scored = [(0.5, -1), (0.5, 1)]
        # the positive has the smaller key and ranks first
        assert average_precision(scored, keys=[(0, 1, 1), (0, 0, 0)]) == 1.0
        assert average_precision(scored) == 0.5

    def test_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(42)
        scores = rng.normal(size=200)
        labels = np.where(rng.random(200) < 0.4, 1, -1)
        a = average_precision(list(zip(scores, labels)))
        b = average_precision(list(zip(np.exp(3 * scores) + 1, labels)))
        assert a == b

    def test_matches_sklearn_without_ties(self):
        rng = np.random.default_rng(42)
        for _ in range(5):
            scores = rng.normal(size=300)
            labels = np.where(rng.random(300) < 0.3, 1, -1)
            ours = average_precision(list(zip(scores, labels)))
            theirs = average_precision_score(labels == 1, scores)
            assert ours == pytest.approx(theirs, abs=1e-12)

    @staticmethod
    def _ranking_aps(scores, labels):
        """AP of every ranking that respects the scores, ties broken all possible ways."""
        aps = []
        for order in itertools.permutations(range(len(scores))):
            if any(scores[a] < scores[b] for a, b in zip(order, order[1:])):
                continue
            hits, total = 0, 0.0
            for rank, i in enumerate(order, start=1):
                if labels[i] == 1:
                    hits += 1
                    total += hits / rank
            aps.append(total / hits)
        return aps

    def test_all_tied_averages_over_key_assignments(self):
        keys = [(0, 0, i) for i in range(4)]
        aps = self._ranking_aps([1.0] * 4, [1, 1, -1, -1])
        assert np.mean(aps) == pytest.approx(49.0 / 72.0)
        placed = []
        for pos in itertools.combinations(range(4), 2):
            labels = [1 if i in pos else -1 for i in range(4)]
            placed.append(average_precision(list(zip([1.0] * 4, labels)), keys=keys))
        assert np.mean(placed) == pytest.approx(49.0 / 72.0)

    def test_tied_ranking_is_one_of_the_orders(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            scores = rng.integers(0, 3, size=6).astype(float).tolist()
            labels = np.where(rng.random(6) < 0.5, 1, -1).tolist()
            labels[2] = 1
            keys = [(0, int(c) // 6, int(c) % 6) for c in rng.permutation(36)[:6]]
            aps = self._ranking_aps(scores, labels)
            got = average_precision(list(zip(scores, labels)), keys=keys)
            assert min(aps) - 1e-12 <= got <= max(aps) + 1e-12
            assert any(got == pytest.approx(a) for a in aps)

    def test_untied_equals_ranking_average(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            scores = rng.normal(size=6).tolist()
            labels = np.where(rng.random(6) < 0.5, 1, -1).tolist()
            labels[0] = 1
            aps = self._ranking_aps(scores, labels)
            assert len(aps) == 1
            assert average_precision(list(zip(scores, labels))) == pytest.approx(aps[0])


class TestAggregate:
    def test_constant_runs(self):
        assert aggregate_runs([1.0] * 10) == (1.0, 0.0)

    def test_population_std(self):
        assert aggregate_runs([0.0, 1.0]) == (0.5, 0.5)
        mean, std = aggregate_runs([0.5, 1.0])
        assert mean == pytest.approx(0.75)
        assert std == pytest.approx(0.25)

    def test_empty(self):
        with pytest.raises(InvalidArgument):
            aggregate_runs([])


class TestDataset:
    def test_rejects_duplicates_and_overlap(self):
        v = Vocab(3, 1)
        f = LabeledFact(0, 0, 1, 1)
        with pytest.raises(InvalidArgument):
            Dataset(v, (f, f), (), ())
        with pytest.raises(InvalidArgument):
            Dataset(v, (f,), (f,), ())
        Dataset(v, (f,), (f,), (), allow_overlap=True)

    def test_rejects_bad_labels_and_indices(self):
        v = Vocab(3, 1)
        with pytest.raises(InvalidArgument):
            Dataset(v, (LabeledFact(0, 0, 1, 0),), (), ())
        with pytest.raises(InvalidArgument):
            Dataset(v, (LabeledFact(0, 0, 3, 1),), (), ())
        with pytest.raises(InvalidArgument):
            make_fact(0, 0, 0, 2)

    def test_directory_round_trip(self, tmp_path, tiny_dataset):
        save_dataset(tmp_path / "ds", tiny_dataset)
        back = load_dataset(tmp_path / "ds")
        assert (back.train, back.valid, back.test) == (tiny_dataset.train, tiny_dataset.valid, tiny_dataset.test)
        assert back.vocab.relation_names == ("parity", "less")
        assert back.provenance == {"generator": "tiny"}
        line = (tmp_path / "ds" / "train.tsv").read_text(encoding="utf-8").splitlines()[0]
        assert line.split("\t")[0] in ("parity", "less")

    def test_read_facts_rejects_bad_label(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("0\t1\t2\t0\n", encoding="utf-8")
        with pytest.raises(InvalidArgument):
            read_facts(path)

    def test_integer_ids_without_vocab(self, tmp_path):
        facts = [LabeledFact(0, 1, 2, 1), LabeledFact(1, 2, 0, -1)]
        write_facts(tmp_path / "f.tsv", facts)
        assert read_facts(tmp_path / "f.tsv") == tuple(facts)

    def test_blank_name_rejected(self, tmp_path):
        (tmp_path / ENTITIES_FILE).write_text("alice\n\nbob\n", encoding="utf-8")
        (tmp_path / RELATIONS_FILE).write_text("knows\n", encoding="utf-8")
        with pytest.raises(InvalidArgument, match=":2: blank name"):
            read_vocab(tmp_path)
        (tmp_path / ENTITIES_FILE).write_text("alice\n  \nbob\n", encoding="utf-8")
        with pytest.raises(InvalidArgument):
            read_vocab(tmp_path)

    def test_trailing_newlines_are_not_names(self, tmp_path):
        (tmp_path / ENTITIES_FILE).write_text("alice\nbob\n\n", encoding="utf-8")
        (tmp_path / RELATIONS_FILE).write_text("knows", encoding="utf-8")
        vocab = read_vocab(tmp_path)
        assert vocab.entity_names == ("alice", "bob")
        assert vocab.relation_names == ("knows",)


class TestSplitSpec:
    def test_individual_requires_fixed_fraction(self):
        SplitSpec(SplitKind.INDIVIDUAL_TENFOLD, "0.8")
        with pytest.raises(InvalidArgument):
            SplitSpec(SplitKind.INDIVIDUAL_TENFOLD, "0.4")

    def test_zero_only_for_family_split(self):
        SplitSpec(SplitKind.FAMILY_FAMILY, 0)
        with pytest.raises(InvalidArgument):
            SplitSpec(SplitKind.FAMILY_RANDOM, 0)
