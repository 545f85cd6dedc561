from collections import Counter

import numpy as np
import pytest
from scipy import stats

from app.core.errors import ConfigError, TrainingError
from app.schemas.graph import Triple
from app.schemas.training import CorruptSide, ScorerName, TrainConfig
from app.services.graph_service import TripleStore
from app.services.training_service import Adam, EmbeddingTrainer, NegativeSampler, corrupt, train

STORE = TripleStore(
    [
        ("a", "r", "b"),
        ("c", "r", "b"),
        ("a", "r", "d"),
        ("e", "s", "f"),
    ]
).freeze()


def small_config(**overrides):
    fields = dict(
        scorer=ScorerName.TRANSE,
        k=4,
        negatives=2,
        learning_rate=0.01,
        batch_size=4,
        max_epochs=30,
        patience=5,
        burn_in=2,
        frequency=1,
        margin=1.0,
        temperature=1.0,
        seed=11,
    )
    fields.update(overrides)
    return TrainConfig(**fields)


def chain_store(n=12):
    triples = [(f"n{i}", "next", f"n{i + 1}") for i in range(n)]
    triples += [(f"n{i}", "kind", "even" if i % 2 == 0 else "odd") for i in range(n)]
    return TripleStore(triples).freeze()


class TestCorrupt:

    def test_candidates_exclude_known_triples(self, rng):
        corruptions = corrupt(Triple("a", "r", "b"), STORE, 8, rng)
        assert len(set(corruptions)) == 8
        assert not any(c in STORE for c in corruptions)
        assert set(corruptions) == {
            Triple("b", "r", "b"), Triple("d", "r", "b"), Triple("e", "r", "b"), Triple("f", "r", "b"),
            Triple("a", "r", "a"), Triple("a", "r", "c"), Triple("a", "r", "e"), Triple("a", "r", "f"),
        }

    def test_one_side_only(self, rng):
        corruptions = corrupt(Triple("a", "r", "b"), STORE, 3, rng, side=CorruptSide.TAIL)
        assert all(c.head == "a" and c.tail != "b" for c in corruptions)

    def test_uniform_over_candidates(self):
        rng = np.random.default_rng(2024)
        draws = 4000
        counts = Counter(corrupt(Triple("a", "r", "b"), STORE, 1, rng)[0] for _ in range(draws))
        assert len(counts) == 8
        _, p_value = stats.chisquare(list(counts.values()))
        assert p_value > 0.001

    def test_pool_too_small(self, rng):
        with pytest.raises(ConfigError, match="entity pool too small"):
            corrupt(Triple("a", "r", "b"), STORE, 9, rng)

    def test_deterministic_under_seed(self):
        first = corrupt(Triple("a", "r", "b"), STORE, 4, np.random.default_rng(5))
        second = corrupt(Triple("a", "r", "b"), STORE, 4, np.random.default_rng(5))
        assert first == second


class TestNegativeSampler:

    def test_negatives_avoid_positives(self, rng):
        positives = np.array([[i, 0, (i + 1) % 50] for i in range(50)], dtype=np.int64)
        sampler = NegativeSampler(50, 1, positives)
        negatives = sampler.sample(positives, 5, rng)
        assert negatives.shape == (50, 5, 3)
        keys = {tuple(row) for row in positives.tolist()}
        assert not any(tuple(row) in keys for row in negatives.reshape(-1, 3).tolist())
        # exactly one side differs from the positive
        same_head = negatives[..., 0] == positives[:, None, 0]
        same_tail = negatives[..., 2] == positives[:, None, 2]
        assert np.all(same_head | same_tail)
        assert np.all(negatives[..., 1] == 0)


class TestAdam:

    def test_minimizes_quadratic(self):
        x = np.array([3.0, -2.0])
        optimizer = Adam(lr=0.1)
        for _ in range(2000):
            optimizer.step({"x": x}, {"x": 2 * x})
        assert np.allclose(x, 0.0, atol=0.05)


class TestTrainer:

    def test_empty_store(self):
        with pytest.raises(TrainingError):
            EmbeddingTrainer(TripleStore(), small_config())

    def test_validation_must_be_disjoint(self):
        with pytest.raises(ConfigError):
            EmbeddingTrainer(STORE, small_config(), valid_triples=[("a", "r", "b")])

    def test_deterministic_under_seed(self):
        store = chain_store()
        first = train(store, [], small_config(max_epochs=5))
        second = train(store, [], small_config(max_epochs=5))
        assert first == second

    def test_extra_entities_are_embedded(self):
        table = train(STORE, [], small_config(max_epochs=1), extra_entities=["unseen"])
        assert table.has_entity("unseen")
        assert table.entities[: len(STORE.entities)] == STORE.entities

    def test_loss_decreases(self):
        trainer = EmbeddingTrainer(chain_store(), small_config(max_epochs=40, learning_rate=0.05))
        trainer.train()
        assert trainer.losses[-1] < trainer.losses[0]

    def test_transe_entities_stay_in_unit_ball(self):
        table = train(chain_store(), [], small_config(max_epochs=3, learning_rate=0.5))
        assert np.all(np.linalg.norm(table.entity_vectors, axis=1) <= 1.0 + 1e-9)

    def test_complex_training_runs(self):
        table = train(chain_store(), [], small_config(scorer=ScorerName.COMPLEX, max_epochs=3))
        assert table.width == 8
        table.check_finite()


class TestEarlyStopping:

    def test_degrading_validation_stops_after_patience(self):
        snapshots = []
        scores = iter(np.linspace(1.0, 0.0, 100))

        def validator(table):
            snapshots.append(table.copy())
            return float(next(scores))

        cfg = small_config(max_epochs=100, burn_in=3, frequency=2, patience=5)
        trainer = EmbeddingTrainer(chain_store(), cfg, validator=validator)
        table = trainer.train()

        # baseline at the burn-in epoch, then `patience` validations without improvement
        assert [r.epoch for r in trainer.history] == [3, 5, 7, 9, 11, 13]
        assert [r.improved for r in trainer.history] == [True] + [False] * 5
        assert trainer.stopped_epoch == 13
        assert len(trainer.losses) == 13
        assert table == snapshots[0]

    def test_improving_validation_runs_to_the_end(self):
        scores = iter(np.linspace(0.0, 1.0, 100))
        cfg = small_config(max_epochs=10, burn_in=0, frequency=1, patience=2)
        trainer = EmbeddingTrainer(chain_store(), cfg, validator=lambda table: float(next(scores)))
        trainer.train()
        assert trainer.stopped_epoch is None
        assert len(trainer.losses) == 10

    def test_filtered_mrr_validation(self):
        store = chain_store()
        valid = [Triple("n3", "kind", "odd")]
        train_store = TripleStore(t for t in store if t not in valid).freeze()
        trainer = EmbeddingTrainer(train_store, small_config(max_epochs=6, burn_in=2, frequency=2), valid_triples=valid)
        trainer.train()
        assert [r.epoch for r in trainer.history] == [2, 4, 6]
        assert all(0.0 < r.mrr <= 1.0 for r in trainer.history)
