import logging
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from app.core.errors import ConfigError, TrainingError
from app.schemas.graph import Triple
from app.schemas.training import CorruptSide, ScorerName, TrainConfig, ValidationRecord
from app.services.embedding_service import EmbeddingTable, get_scorer
from app.services.graph_service import TripleStore
from app.services.ranking_service import evaluate_ranks

logger = logging.getLogger(__name__)

# resampling rounds for negatives that hit a known triple
MAX_RESAMPLE_ROUNDS = 10


def corrupt(
    triple: Triple,
    store: TripleStore,
    n: int,
    rng: np.random.Generator,
    side: CorruptSide = CorruptSide.BOTH,
) -> List[Triple]:
    """
    n distinct corruptions of triple (head or tail replaced by a store entity),
    drawn uniformly from the candidates that are not known-true triples.
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    h, r, t = triple
    side = CorruptSide(side)

    candidates: List[Triple] = []
    if side in (CorruptSide.HEAD, CorruptSide.BOTH):
        candidates += [Triple(e, r, t) for e in store.entities if e != h and Triple(e, r, t) not in store]
    if side in (CorruptSide.TAIL, CorruptSide.BOTH):
        candidates += [Triple(h, r, e) for e in store.entities if e != t and Triple(h, r, e) not in store]
    candidates = list(dict.fromkeys(candidates))

    if len(candidates) < n:
        raise ConfigError(f"entity pool too small: {len(candidates)} corruptions available, {n} requested")
    chosen = rng.choice(len(candidates), size=n, replace=False)
    return [candidates[i] for i in chosen]


class NegativeSampler:
    """Vectorized filtered corruption of index triples"""

    def __init__(self, n_entities: int, n_relations: int, known: np.ndarray):
        self.n_entities = n_entities
        self.n_relations = n_relations
        self.known_keys = np.unique(self._keys(known))

    def _keys(self, idx: np.ndarray) -> np.ndarray:
        idx = idx.astype(np.int64)
        return (idx[..., 0] * self.n_relations + idx[..., 1]) * self.n_entities + idx[..., 2]

    def _is_known(self, idx: np.ndarray) -> np.ndarray:
        keys = self._keys(idx)
        return np.isin(keys, self.known_keys)

    def sample(self, positives: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        """(B, n, 3) negatives; each replaces head or tail with equal probability"""
        negatives = np.repeat(positives[:, None, :], n, axis=1)
        replace_head = rng.random(negatives.shape[:2]) < 0.5
        pending = np.ones(negatives.shape[:2], dtype=bool)
        for _ in range(MAX_RESAMPLE_ROUNDS):
            draws = rng.integers(0, self.n_entities, size=negatives.shape[:2])
            negatives[..., 0] = np.where(pending & replace_head, draws, negatives[..., 0])
            negatives[..., 2] = np.where(pending & ~replace_head, draws, negatives[..., 2])
            pending = self._is_known(negatives)
            if not pending.any():
                break
        else:
            logger.debug(f"{int(pending.sum())} negatives still collide with known triples after resampling")
        return negatives


def _log_sigmoid(x: np.ndarray) -> np.ndarray:
    return -np.logaddexp(0.0, -x)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return np.exp(_log_sigmoid(x))


def adversarial_weights(neg_scores: np.ndarray, temperature: float) -> np.ndarray:
    logits = temperature * np.asarray(neg_scores, dtype=np.float64)
    logits = logits - logits.max(axis=-1, keepdims=True)
    weights = np.exp(logits)
    return weights / weights.sum(axis=-1, keepdims=True)


def self_adversarial_loss(
    pos_scores: np.ndarray,
    neg_scores: np.ndarray,
    margin: float,
    temperature: float,
    weights: Optional[np.ndarray] = None,
) -> Tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """
    L = mean_i [ -log s(margin + pos_i) - sum_j w_ij log s(-neg_ij - margin) ]

    w = softmax(temperature * neg) per positive, held constant for the gradients.
    Returns (loss, dL/dpos, dL/dneg, w).
    """
    pos = np.atleast_1d(np.asarray(pos_scores, dtype=np.float64))
    neg = np.asarray(neg_scores, dtype=np.float64).reshape(pos.shape[0], -1)
    if pos.size == 0 or neg.shape[1] == 0:
        raise ConfigError("loss needs at least one positive and one negative")
    if weights is None:
        weights = adversarial_weights(neg, temperature)

    per_positive = -_log_sigmoid(margin + pos) - (weights * _log_sigmoid(-neg - margin)).sum(axis=1)
    batch = pos.shape[0]
    loss = float(per_positive.mean())
    d_pos = -_sigmoid(-(margin + pos)) / batch
    d_neg = weights * _sigmoid(neg + margin) / batch
    return loss, d_pos, d_neg, weights


def loss_and_gradients(
    table: EmbeddingTable,
    positives: np.ndarray,
    negatives: np.ndarray,
    margin: float,
    temperature: float,
    weights: Optional[np.ndarray] = None,
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Loss of a batch and its dense gradients w.r.t. the entity and relation matrices"""
    scorer = get_scorer(table.scorer)
    E, R = table.entity_vectors, table.relation_vectors
    width = table.width

    h, r, t = E[positives[:, 0]], R[positives[:, 1]], E[positives[:, 2]]
    hn, rn, tn = E[negatives[..., 0]], R[negatives[..., 1]], E[negatives[..., 2]]
    loss, d_pos, d_neg, _ = self_adversarial_loss(
        scorer.score(h, r, t), scorer.score(hn, rn, tn), margin, temperature, weights
    )

    entity_grad = np.zeros_like(E)
    relation_grad = np.zeros_like(R)

    gh, gr, gt = scorer.gradients(h, r, t)
    np.add.at(entity_grad, positives[:, 0], d_pos[:, None] * gh)
    np.add.at(relation_grad, positives[:, 1], d_pos[:, None] * gr)
    np.add.at(entity_grad, positives[:, 2], d_pos[:, None] * gt)

    gh, gr, gt = scorer.gradients(hn, rn, tn)
    scale = d_neg[..., None]
    np.add.at(entity_grad, negatives[..., 0].ravel(), (scale * gh).reshape(-1, width))
    np.add.at(relation_grad, negatives[..., 1].ravel(), (scale * gr).reshape(-1, width))
    np.add.at(entity_grad, negatives[..., 2].ravel(), (scale * gt).reshape(-1, width))
    return loss, entity_grad, relation_grad


class Adam:
    """Adaptive moment estimation over a dict of named parameter arrays, updated in place"""

    def __init__(self, lr: float = 0.001, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        step_size = self.lr / bc1

        for name, param in params.items():
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(param)
                self.v[name] = np.zeros_like(param)
            self.m[name] *= self.beta1
            self.m[name] += (1.0 - self.beta1) * g
            self.v[name] *= self.beta2
            self.v[name] += (1.0 - self.beta2) * (g * g)
            param -= step_size * self.m[name] / (np.sqrt(self.v[name] / bc2) + self.epsilon)


Validator = Callable[[EmbeddingTable], float]


class EmbeddingTrainer:
    """
    Mini-batch Adam training with filtered-MRR early stopping.

    Validation runs at every epoch e >= burn_in with (e - burn_in) % frequency == 0.
    The first validation sets the baseline; training stops once `patience`
    validations in a row fail to beat the best MRR, and the best table is restored.
    """

    def __init__(
        self,
        store: TripleStore,
        cfg: TrainConfig,
        valid_triples: Sequence[Triple] = (),
        validator: Optional[Validator] = None,
        extra_entities: Iterable[str] = (),
    ):
        if len(store) == 0:
            raise TrainingError("cannot train on an empty store")
        self.store = store
        self.cfg = cfg
        self.valid_triples = [Triple(*t) for t in valid_triples]
        overlap = [t for t in self.valid_triples if t in store]
        if overlap:
            raise ConfigError(f"validation triples must be disjoint from training triples, e.g. {overlap[0]}")
        self.validator = validator
        if self.validator is None and self.valid_triples:
            self.validator = self._filtered_mrr
        self.entities = list(dict.fromkeys(list(store.entities) + list(extra_entities)))
        self.relations = list(store.relations)
        self.history: List[ValidationRecord] = []
        self.losses: List[float] = []
        self.stopped_epoch: Optional[int] = None

    def _filtered_mrr(self, table: EmbeddingTable) -> float:
        report = evaluate_ranks(
            table,
            self.valid_triples,
            known=self.store.sorted_triples(),
            side=CorruptSide.BOTH,
            batch_size=self.cfg.valid_batch_size,
        )
        return report.mrr

    def _should_validate(self, epoch: int) -> bool:
        return (
            self.validator is not None
            and epoch >= self.cfg.burn_in
            and (epoch - self.cfg.burn_in) % self.cfg.frequency == 0
        )

    def train(self) -> EmbeddingTable:
        cfg = self.cfg
        rng = np.random.default_rng(cfg.seed)
        table = EmbeddingTable.initialize(cfg.scorer, cfg.k, self.entities, self.relations, rng)
        positives = table.indices(self.store.sorted_triples())
        sampler = NegativeSampler(len(table.entities), len(table.relations), positives)
        optimizer = Adam(lr=cfg.learning_rate)
        params = {"entities": table.entity_vectors, "relations": table.relation_vectors}

        logger.info(
            f"Training {cfg.scorer.value} k={cfg.k} on {len(positives)} triples, "
            f"{len(table.entities)} entities, {len(table.relations)} relations (seed {cfg.seed})"
        )

        best_mrr: Optional[float] = None
        best_table: Optional[EmbeddingTable] = None
        misses = 0

        for epoch in tqdm(range(1, cfg.max_epochs + 1), desc="epochs", disable=not cfg.progress):
            order = rng.permutation(len(positives))
            epoch_loss = 0.0
            for start in range(0, len(order), cfg.batch_size):
                batch = positives[order[start:start + cfg.batch_size]]
                negatives = sampler.sample(batch, cfg.negatives, rng)
                loss, entity_grad, relation_grad = loss_and_gradients(
                    table, batch, negatives, cfg.margin, cfg.temperature
                )
                if not np.isfinite(loss):
                    raise TrainingError(f"NaN loss at epoch {epoch}, batch starting at {start}")
                optimizer.step(params, {"entities": entity_grad, "relations": relation_grad})
                epoch_loss += loss * len(batch)

            if cfg.scorer == ScorerName.TRANSE:
                norms = np.linalg.norm(table.entity_vectors, axis=1, keepdims=True)
                np.divide(table.entity_vectors, np.maximum(norms, 1.0), out=table.entity_vectors)
            table.check_finite()
            self.losses.append(epoch_loss / len(positives))
            logger.debug(f"epoch {epoch}: loss {self.losses[-1]:.6f}")

            if not self._should_validate(epoch):
                continue
            mrr = self.validator(table)
            improved = best_mrr is None or mrr > best_mrr
            self.history.append(ValidationRecord(epoch=epoch, mrr=mrr, improved=improved))
            if improved:
                best_mrr, best_table, misses = mrr, table.copy(), 0
                logger.info(f"epoch {epoch}: validation MRR {mrr:.4f} (best)")
            else:
                misses += 1
                logger.info(f"epoch {epoch}: validation MRR {mrr:.4f}, no improvement ({misses}/{cfg.patience})")
                if misses >= cfg.patience:
                    self.stopped_epoch = epoch
                    logger.info(f"Early stopping at epoch {epoch}; restoring epoch with MRR {best_mrr:.4f}")
                    break

        if best_table is not None:
            table = best_table
        logger.info(f"✅ Training finished after {self.stopped_epoch or cfg.max_epochs} epochs")
        return table


def train(
    store: TripleStore,
    valid_triples: Sequence[Triple],
    cfg: TrainConfig,
    extra_entities: Iterable[str] = (),
    validator: Optional[Validator] = None,
) -> EmbeddingTable:
    return EmbeddingTrainer(store, cfg, valid_triples, validator=validator, extra_entities=extra_entities).train()
