# test_models.py
import numpy as np
import pytest

from kg_core import InvalidArgument, InvalidState, LabeledFact, Vocab
from models import (
    ALL_MODELS,
    ModelConfig,
    ModelFamily,
    ModelKind,
    fact_gradient,
    fact_loss,
    init_store,
    loss_and_gradient,
    probability,
    project_transe_entities,
    score,
    score_facts,
    trilinear,
)

VOCAB = Vocab(7, 3)


def _numeric_gradient(store, fact, lam, key, h=1e-5):
    row = store.row(key)
    grad = np.zeros_like(row)
    it = np.nditer(row, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = row[idx]
        row[idx] = orig + h
        up = fact_loss(store, fact, lam)
        row[idx] = orig - h
        down = fact_loss(store, fact, lam)
        row[idx] = orig
        grad[idx] = (up - down) / (2 * h)
    return grad


class TestKinds:
    def test_parse_names(self):
        assert ModelKind.parse("transe-l1") == ModelKind(ModelFamily.TRANSE, 1)
        assert ModelKind.parse("TransE") == ModelKind(ModelFamily.TRANSE, 2)
        assert ModelKind.parse("FModel").family is ModelFamily.F
        assert ModelKind.parse("complex").name == "ComplEx"
        assert [k.name for k in ALL_MODELS] == [
            "CP", "RESCAL", "TransE-L1", "TransE-L2", "F", "DistMult", "ComplEx",
        ]

    def test_parse_rejects_unknown(self):
        with pytest.raises(InvalidArgument):
            ModelKind.parse("holE")
        with pytest.raises(InvalidArgument):
            ModelKind.parse("transe-l3")
        with pytest.raises(InvalidArgument):
            ModelKind(ModelFamily.CP, 1)

    def test_config_validation(self):
        with pytest.raises(InvalidArgument):
            ModelConfig("CP", 0)
        with pytest.raises(InvalidArgument):
            ModelConfig("CP", 5, lam=-0.1)
        assert ModelConfig("distmult", 5, 0.01).kind.family is ModelFamily.DISTMULT


class TestScores:
    def test_trilinear(self):
        assert trilinear([1, 2], [3, 4], [5, 6]) == 1 * 3 * 5 + 2 * 4 * 6
        with pytest.raises(InvalidArgument):
            trilinear([1, 2], [1], [1, 2])

    def test_cp_hand_example(self):
        store = init_store("CP", Vocab(2, 1), 2, seed=0)
        store.blocks["W"][0] = [1.0, 2.0]
        store.blocks["U"][0] = [3.0, 1.0]
        store.blocks["V"][1] = [0.5, -1.0]
        assert score(store, (0, 0, 1)) == pytest.approx(1.0 * 3.0 * 0.5 + 2.0 * 1.0 * -1.0)

    def test_transe_is_negative_distance(self):
        for q in (1, 2):
            store = init_store(ModelKind(ModelFamily.TRANSE, q), VOCAB, 4, seed=3)
            b = store.blocks
            d = b["E"][1] + b["W"][2] - b["E"][5]
            assert score(store, (2, 1, 5)) == pytest.approx(-np.linalg.norm(d, ord=q))

    def test_distmult_is_symmetric(self):
        store = init_store("DistMult", VOCAB, 5, seed=1)
        for s, o in [(0, 1), (2, 6), (3, 3)]:
            assert score(store, (1, s, o)) == pytest.approx(score(store, (1, o, s)))

    def test_complex_imaginary_relation_is_antisymmetric(self):
        store = init_store("ComplEx", VOCAB, 5, seed=1)
        store.blocks["W_re"][0] = 0.0
        for s, o in [(0, 1), (2, 6)]:
            assert score(store, (0, s, o)) == pytest.approx(-score(store, (0, o, s)))
        assert score(store, (0, 4, 4)) == pytest.approx(0.0, abs=1e-12)

    def test_complex_matches_complex_arithmetic(self):
        store = init_store("ComplEx", VOCAB, 4, seed=8)
        b = store.blocks
        w = b["W_re"][1] + 1j * b["W_im"][1]
        es = b["E_re"][2] + 1j * b["E_im"][2]
        eo = b["E_re"][4] + 1j * b["E_im"][4]
        assert score(store, (1, 2, 4)) == pytest.approx(trilinear(w, es, np.conj(eo)).real)

    def test_vectorized_matches_single(self):
        rng = np.random.default_rng(42)
        r = rng.integers(0, 3, size=40)
        s = rng.integers(0, 7, size=40)
        o = rng.integers(0, 7, size=40)
        for kind in ALL_MODELS:
            store = init_store(kind, VOCAB, 4, seed=11)
            batch = score_facts(store, r, s, o)
            single = [score(store, (ri, si, oi)) for ri, si, oi in zip(r, s, o)]
            np.testing.assert_allclose(batch, single, rtol=1e-12, atol=1e-12)

    def test_out_of_range(self):
        store = init_store("CP", VOCAB, 3, seed=0)
        with pytest.raises(InvalidArgument):
            score(store, (3, 0, 0))
        with pytest.raises(InvalidArgument):
            score_facts(store, [0], [0], [7])

    def test_probability(self):
        assert probability(0.0) == 0.5
        assert probability(50.0) == pytest.approx(1.0, abs=1e-15)
        assert probability(np.log(3.0)) == pytest.approx(0.75, rel=1e-12)


class TestInit:
    def test_deterministic(self):
        a = init_store("RESCAL", VOCAB, 3, seed=5)
        b = init_store("RESCAL", VOCAB, 3, seed=5)
        for name in a.blocks:
            np.testing.assert_array_equal(a.blocks[name], b.blocks[name])
        assert a.blocks["W"].shape == (3, 3, 3)

    def test_transe_entities_unit_norm(self):
        store = init_store("TransE-L2", VOCAB, 6, seed=2)
        np.testing.assert_allclose(np.linalg.norm(store.blocks["E"], axis=1), 1.0)
        store.blocks["E"][0] = 0.0
        store.blocks["E"][1] *= 7.0
        project_transe_entities(store)
        np.testing.assert_allclose(np.linalg.norm(store.blocks["E"], axis=1), 1.0)

    def test_projection_rejects_other_models(self):
        with pytest.raises(InvalidState):
            project_transe_entities(init_store("CP", VOCAB, 2, seed=0))

    def test_pair_rows_do_not_depend_on_access_order(self):
        a = init_store("F", VOCAB, 4, seed=9)
        b = init_store("F", VOCAB, 4, seed=9)
        pairs = [(0, 1), (3, 2), (6, 6), (1, 0)]
        for s, o in pairs:
            a.pair_row(s, o)
        for s, o in reversed(pairs):
            b.pair_row(s, o)
        for s, o in pairs:
            np.testing.assert_array_equal(a.pair_row(s, o), b.pair_row(s, o))
        assert not np.array_equal(a.pair_row(0, 1), a.pair_row(1, 0))


class TestLossAndGradient:
    def test_zero_score_loss_is_log_two(self):
        store = init_store("DistMult", VOCAB, 3, seed=0)
        store.blocks["W"][:] = 0.0
        assert fact_loss(store, LabeledFact(0, 1, 2, 1), 0.0) == pytest.approx(np.log(2.0))

    def test_regularizer_counts_repeated_rows(self):
        store = init_store("DistMult", VOCAB, 3, seed=0)
        store.blocks["W"][:] = 0.0
        e = store.blocks["E"][4]
        expected = np.log(2.0) + 0.1 * 2 * float(e @ e)
        assert fact_loss(store, LabeledFact(0, 4, 4, -1), 0.1) == pytest.approx(expected)

    def test_negative_lambda_rejected(self):
        store = init_store("CP", VOCAB, 2, seed=0)
        with pytest.raises(InvalidArgument):
            fact_loss(store, LabeledFact(0, 0, 1, 1), -1.0)
        with pytest.raises(InvalidArgument):
            fact_gradient(store, LabeledFact(0, 0, 1, 1), -1.0)

    @pytest.mark.parametrize("kind", ALL_MODELS, ids=lambda k: k.name)
    def test_gradient_matches_finite_differences(self, kind):
        rng = np.random.default_rng(42)
        for trial in range(100):
            store = init_store(kind, VOCAB, 4, seed=int(rng.integers(1 << 31)))
            r = int(rng.integers(3))
            s = int(rng.integers(7))
            # every tenth instance reuses the subject as object
            o = s if trial % 10 == 0 else int(rng.integers(7))
            fact = LabeledFact(r, s, o, int(rng.choice([-1, 1])))
            lam = float(rng.uniform(0.0, 0.1))

            loss, grads = loss_and_gradient(store, fact, lam)
            assert loss == pytest.approx(fact_loss(store, fact, lam))
            for key, analytic in grads.items():
                numeric = _numeric_gradient(store, fact, lam, key)
                scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-4)
                rel = np.linalg.norm(analytic - numeric) / scale
                assert rel <= 1e-5, (kind.name, trial, key, rel)


class TestModelIdentities:
    def test_complex_is_real_part_of_conjugated_product(self):
        rng = np.random.default_rng(3)
        for seed in range(5):
            store = init_store("ComplEx", VOCAB, 6, seed=seed)
            b = store.blocks
            for _ in range(10):
                r, s, o = int(rng.integers(3)), int(rng.integers(7)), int(rng.integers(7))
                w = b["W_re"][r] + 1j * b["W_im"][r]
                es = b["E_re"][s] + 1j * b["E_im"][s]
                eo = b["E_re"][o] + 1j * b["E_im"][o]
                expected = trilinear(es, w, np.conj(eo)).real
                assert score(store, (r, s, o)) == pytest.approx(expected, rel=1e-12, abs=1e-12)

    def test_complex_swap_equals_conjugated_relation(self):
        store = init_store("ComplEx", VOCAB, 5, seed=4)
        flipped = store.copy()
        flipped.blocks["W_im"] *= -1.0
        for r, s, o in [(0, 1, 2), (1, 6, 0), (2, 3, 3)]:
            assert score(store, (r, s, o)) == pytest.approx(score(flipped, (r, o, s)), rel=1e-12, abs=1e-12)

    def test_complex_without_imaginary_parts_is_distmult(self):
        rng = np.random.default_rng(5)
        cx = init_store("ComplEx", VOCAB, 4, seed=6)
        cx.blocks["E_im"][:] = 0.0
        cx.blocks["W_im"][:] = 0.0
        dm = init_store("DistMult", VOCAB, 4, seed=0)
        dm.blocks["E"][:] = cx.blocks["E_re"]
        dm.blocks["W"][:] = cx.blocks["W_re"]
        r, s, o = rng.integers(0, 3, 30), rng.integers(0, 7, 30), rng.integers(0, 7, 30)
        np.testing.assert_allclose(score_facts(cx, r, s, o), score_facts(dm, r, s, o), rtol=1e-12, atol=1e-12)

    def test_transe_l2_expansion(self):
        store = init_store("TransE-L2", VOCAB, 5, seed=7)
        W = store.blocks["W"]
        W /= np.linalg.norm(W, axis=1, keepdims=True)
        E = store.blocks["E"]
        for r, s, o in [(0, 1, 2), (1, 4, 4), (2, 6, 0)]:
            es, w, eo = E[s], W[r], E[o]
            expected = 3.0 + 2.0 * (es @ w - es @ eo - w @ eo)
            assert score(store, (r, s, o)) ** 2 == pytest.approx(expected, rel=1e-10, abs=1e-12)

    def test_init_draws_are_standard_normal(self):
        for kind in ("CP", "ComplEx"):
            store = init_store(kind, Vocab(2000, 20), 25, seed=1)
            draws = np.concatenate([v.ravel() for v in store.blocks.values()])
            assert draws.size >= 100_000
            assert abs(draws.mean()) < 0.02
            assert abs(draws.var() - 1.0) < 0.05


class TestProjection:
    def test_hand_rows(self):
        store = init_store("TransE-L1", Vocab(3, 1), 2, seed=0)
        E = store.blocks["E"]
        E[0] = [3.0, 4.0]
        E[1] = 0.0
        unit = E[2].copy()
        project_transe_entities(store)
        np.testing.assert_allclose(E[0], [0.6, 0.8], rtol=1e-15)
        np.testing.assert_array_equal(E[1], [1.0, 0.0])
        np.testing.assert_allclose(E[2], unit, rtol=1e-15)
