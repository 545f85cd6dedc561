import numpy as np
import pytest

from app.core.errors import ConfigError, UnknownIdError
from app.schemas.graph import Triple
from app.schemas.training import ScorerName
from app.services.embedding_service import ComplExScorer, EmbeddingTable, TransEScorer, score
from app.services.training_service import loss_and_gradients, self_adversarial_loss

EPS = 1e-6
TOL = 1e-5


def relative_error(analytic, numeric):
    analytic, numeric = np.ravel(analytic), np.ravel(numeric)
    scale = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-8)
    return float(np.linalg.norm(analytic - numeric) / scale)


def numeric_gradient(f, x):
    grad = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        original = x[i]
        x[i] = original + EPS
        plus = f()
        x[i] = original - EPS
        minus = f()
        x[i] = original
        grad[i] = (plus - minus) / (2 * EPS)
    return grad


class TestScorers:

    def test_transe_score(self):
        h, r, t = np.array([1.0, 0.0]), np.array([0.5, 0.5]), np.array([1.0, 1.0])
        assert TransEScorer.score(h, r, t) == pytest.approx(-1.0)

    def test_complex_matches_complex_arithmetic(self, rng):
        h, r, t = (rng.normal(size=(3, 8)) for _ in range(3))
        expected = []
        for hh, rr, tt in zip(h, r, t):
            hc = hh[0::2] + 1j * hh[1::2]
            rc = rr[0::2] + 1j * rr[1::2]
            tc = tt[0::2] + 1j * tt[1::2]
            expected.append(np.real(np.sum(hc * rc * np.conj(tc))))
        assert np.allclose(ComplExScorer.score(h, r, t), expected, atol=1e-12)

    def test_transe_invariant_under_translation(self, rng):
        entities, relations = ["a", "b", "c", "d"], ["r", "s"]
        entity_vectors = rng.normal(size=(4, 5))
        relation_vectors = rng.normal(size=(2, 5))
        shift = rng.normal(size=5)
        table = EmbeddingTable(ScorerName.TRANSE, 5, entities, relations, entity_vectors, relation_vectors)
        moved = EmbeddingTable(ScorerName.TRANSE, 5, entities, relations, entity_vectors + shift, relation_vectors)
        triples = [Triple(h, r, t) for h in entities for r in relations for t in entities]
        assert np.allclose(table.score_triples(triples), moved.score_triples(triples), atol=1e-12)

    def test_complex_scores_asymmetric_relations(self):
        # h = 1, t = i, r = i: Re(h r conj(t)) = 1 while Re(t r conj(h)) = -1
        table = EmbeddingTable(
            ScorerName.COMPLEX, 1, ["h", "t"], ["r"], np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([[0.0, 1.0]])
        )
        assert score(table, Triple("h", "r", "t")) == pytest.approx(1.0)
        assert score(table, Triple("t", "r", "h")) == pytest.approx(-1.0)

    def test_transe_scores_translation_as_best(self):
        table = EmbeddingTable(
            ScorerName.TRANSE, 2, ["h", "t"], ["r"], np.array([[0.5, -1.0], [1.5, 1.0]]), np.array([[1.0, 2.0]])
        )
        assert score(table, Triple("h", "r", "t")) == 0.0
        assert score(table, Triple("t", "r", "h")) < 0.0

    def test_complex_split_join(self, rng):
        x = rng.normal(size=(2, 6))
        assert np.array_equal(ComplExScorer.join(*ComplExScorer.split(x)), x)

    @pytest.mark.parametrize("scorer", [TransEScorer, ComplExScorer])
    def test_gradients_match_finite_differences(self, scorer, rng):
        checked = 0
        for _ in range(100):
            k = int(rng.integers(1, 9))
            width = scorer.width(k)
            h, r, t = (rng.normal(size=width) for _ in range(3))
            if scorer is TransEScorer and np.min(np.abs(h + r - t)) < 1e-3:
                continue
            analytic = scorer.gradients(h, r, t)
            for vector, grad in zip((h, r, t), analytic):
                numeric = numeric_gradient(lambda: float(scorer.score(h, r, t)), vector)
                assert relative_error(grad, numeric) < TOL
            checked += 1
        assert checked > 90


class TestSelfAdversarialLoss:

    def test_gradients_with_fixed_weights(self, rng):
        for _ in range(100):
            batch, n = int(rng.integers(1, 4)), int(rng.integers(1, 6))
            pos = rng.normal(size=batch)
            neg = rng.normal(size=(batch, n))
            margin, temperature = float(rng.uniform(0, 2)), float(rng.uniform(0, 2))
            _, d_pos, d_neg, weights = self_adversarial_loss(pos, neg, margin, temperature)

            def loss():
                return self_adversarial_loss(pos, neg, margin, temperature, weights)[0]

            assert relative_error(d_pos, numeric_gradient(loss, pos)) < TOL
            assert relative_error(d_neg, numeric_gradient(loss, neg)) < TOL

    def test_weights_are_softmax(self):
        _, _, _, weights = self_adversarial_loss(np.array([0.0]), np.array([[0.0, np.log(3.0)]]), 1.0, 1.0)
        assert weights[0] == pytest.approx([0.25, 0.75])

    def test_zero_temperature_gives_uniform_weights(self):
        _, _, _, weights = self_adversarial_loss(np.array([0.0]), np.array([[1.0, -4.0, 2.0, 0.5]]), 1.0, 0.0)
        assert weights[0] == pytest.approx([0.25] * 4)

    def test_needs_negatives(self):
        with pytest.raises(ConfigError):
            self_adversarial_loss(np.array([0.0]), np.zeros((1, 0)), 1.0, 1.0)


class TestTableGradients:

    def test_complex_table_gradients(self, rng):
        entities = [f"e{i}" for i in range(6)]
        table = EmbeddingTable(
            ScorerName.COMPLEX, 3, entities, ["r0", "r1"],
            rng.normal(scale=0.5, size=(6, 6)), rng.normal(scale=0.5, size=(2, 6)),
        )
        positives = np.array([[0, 0, 1], [2, 1, 3]])
        negatives = np.array([[[4, 0, 1], [0, 0, 5]], [[2, 1, 0], [5, 1, 3]]])
        _, _, _, weights = self_adversarial_loss(
            table.score_indices(positives), table.score_indices(negatives), 2.0, 1.0
        )
        _, entity_grad, relation_grad = loss_and_gradients(table, positives, negatives, 2.0, 1.0, weights)

        def loss():
            return loss_and_gradients(table, positives, negatives, 2.0, 1.0, weights)[0]

        assert relative_error(entity_grad, numeric_gradient(loss, table.entity_vectors)) < TOL
        assert relative_error(relation_grad, numeric_gradient(loss, table.relation_vectors)) < TOL


class TestEmbeddingTable:

    def test_initialization_bounds(self, rng):
        table = EmbeddingTable.initialize(ScorerName.TRANSE, 16, ["a", "b"], ["r"], rng)
        assert table.entity_vectors.shape == (2, 16)
        assert np.all(np.abs(table.entity_vectors) <= 6.0 / 4.0)

    def test_complex_width(self, rng):
        table = EmbeddingTable.initialize(ScorerName.COMPLEX, 5, ["a"], ["r"], rng)
        assert table.width == 10

    def test_score_unknown_entity(self, rng):
        table = EmbeddingTable.initialize(ScorerName.TRANSE, 4, ["a", "b"], ["r"], rng)
        with pytest.raises(UnknownIdError):
            score(table, Triple("a", "r", "zzz"))

    def test_score_matches_scorer(self, rng):
        table = EmbeddingTable.initialize(ScorerName.TRANSE, 4, ["a", "b"], ["r"], rng)
        expected = TransEScorer.score(table.entity_vectors[0], table.relation_vectors[0], table.entity_vectors[1])
        assert score(table, Triple("a", "r", "b")) == pytest.approx(float(expected))

    def test_scorer_mismatch(self, rng):
        table = EmbeddingTable.initialize(ScorerName.TRANSE, 4, ["a", "b"], ["r"], rng)
        with pytest.raises(ConfigError):
            score(table, Triple("a", "r", "b"), scorer=ScorerName.COMPLEX)
