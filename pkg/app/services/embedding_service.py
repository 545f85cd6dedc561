import logging
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import ConfigError, TrainingError, UnknownIdError
from app.schemas.graph import Triple
from app.schemas.training import ScorerName

logger = logging.getLogger(__name__)


class TransEScorer:
    """score = -||h + r - t||_1"""

    @staticmethod
    def width(k: int) -> int:
        return k

    @staticmethod
    def score(h: np.ndarray, r: np.ndarray, t: np.ndarray) -> np.ndarray:
        return -np.abs(h + r - t).sum(axis=-1)

    @staticmethod
    def gradients(h: np.ndarray, r: np.ndarray, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        sign = np.sign(h + r - t)
        return -sign, -sign, sign


class ComplExScorer:
    """
    score = Re(<h, r, conj(t)>)

    Vectors of k complex numbers are stored as 2k reals, interleaved:
    column 2j holds the real part of component j, column 2j+1 its imaginary part.
    """

    @staticmethod
    def width(k: int) -> int:
        return 2 * k

    @staticmethod
    def split(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return x[..., 0::2], x[..., 1::2]

    @staticmethod
    def join(real: np.ndarray, imag: np.ndarray) -> np.ndarray:
        out = np.empty(real.shape[:-1] + (2 * real.shape[-1],), dtype=np.float64)
        out[..., 0::2] = real
        out[..., 1::2] = imag
        return out

    @staticmethod
    def score(h: np.ndarray, r: np.ndarray, t: np.ndarray) -> np.ndarray:
        hr, hi = ComplExScorer.split(h)
        rr, ri = ComplExScorer.split(r)
        tr, ti = ComplExScorer.split(t)
        return ((hr * rr - hi * ri) * tr + (hr * ri + hi * rr) * ti).sum(axis=-1)

    @staticmethod
    def gradients(h: np.ndarray, r: np.ndarray, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        hr, hi = ComplExScorer.split(h)
        rr, ri = ComplExScorer.split(r)
        tr, ti = ComplExScorer.split(t)
        grad_h = ComplExScorer.join(rr * tr + ri * ti, rr * ti - ri * tr)
        grad_r = ComplExScorer.join(hr * tr + hi * ti, hr * ti - hi * tr)
        grad_t = ComplExScorer.join(hr * rr - hi * ri, hr * ri + hi * rr)
        return grad_h, grad_r, grad_t


SCORERS = {
    ScorerName.TRANSE: TransEScorer,
    ScorerName.COMPLEX: ComplExScorer,
}


def get_scorer(name: ScorerName):
    try:
        return SCORERS[ScorerName(name)]
    except (KeyError, ValueError):
        raise ConfigError(f"unknown scorer: {name}")


class EmbeddingTable:
    """Entity and relation vectors of one trained model, rows indexed by id tables"""

    def __init__(
        self,
        scorer: ScorerName,
        k: int,
        entities: Sequence[str],
        relations: Sequence[str],
        entity_vectors: np.ndarray,
        relation_vectors: np.ndarray,
    ):
        self.scorer = ScorerName(scorer)
        self.k = int(k)
        self.entities: List[str] = list(entities)
        self.relations: List[str] = list(relations)
        self.entity_index: Dict[str, int] = {e: i for i, e in enumerate(self.entities)}
        self.relation_index: Dict[str, int] = {r: i for i, r in enumerate(self.relations)}
        if len(self.entity_index) != len(self.entities) or len(self.relation_index) != len(self.relations):
            raise ConfigError("embedding id tables must not contain duplicates")

        width = get_scorer(self.scorer).width(self.k)
        self.entity_vectors = np.asarray(entity_vectors, dtype=np.float64)
        self.relation_vectors = np.asarray(relation_vectors, dtype=np.float64)
        if self.entity_vectors.shape != (len(self.entities), width):
            raise ConfigError(f"entity matrix shape {self.entity_vectors.shape} != {(len(self.entities), width)}")
        if self.relation_vectors.shape != (len(self.relations), width):
            raise ConfigError(f"relation matrix shape {self.relation_vectors.shape} != {(len(self.relations), width)}")

    @classmethod
    def initialize(
        cls,
        scorer: ScorerName,
        k: int,
        entities: Sequence[str],
        relations: Sequence[str],
        rng: np.random.Generator,
    ) -> "EmbeddingTable":
        """Uniform init in [-6/sqrt(k), 6/sqrt(k)]"""
        width = get_scorer(scorer).width(k)
        bound = 6.0 / np.sqrt(k)
        entity_vectors = rng.uniform(-bound, bound, size=(len(entities), width))
        relation_vectors = rng.uniform(-bound, bound, size=(len(relations), width))
        return cls(scorer, k, entities, relations, entity_vectors, relation_vectors)

    @property
    def width(self) -> int:
        return self.entity_vectors.shape[1]

    def entity_id(self, entity: str) -> int:
        try:
            return self.entity_index[entity]
        except KeyError:
            raise UnknownIdError(f"unknown entity: {entity}")

    def relation_id(self, relation: str) -> int:
        try:
            return self.relation_index[relation]
        except KeyError:
            raise UnknownIdError(f"unknown relation: {relation}")

    def has_entity(self, entity: str) -> bool:
        return entity in self.entity_index

    def indices(self, triples: Iterable[Triple]) -> np.ndarray:
        """(n, 3) int array of head/relation/tail rows"""
        rows = [(self.entity_id(h), self.relation_id(r), self.entity_id(t)) for h, r, t in triples]
        return np.asarray(rows, dtype=np.int64).reshape(-1, 3)

    def score_indices(self, idx: np.ndarray) -> np.ndarray:
        scorer = get_scorer(self.scorer)
        return scorer.score(
            self.entity_vectors[idx[..., 0]],
            self.relation_vectors[idx[..., 1]],
            self.entity_vectors[idx[..., 2]],
        )

    def score_triples(self, triples: Iterable[Triple]) -> np.ndarray:
        return self.score_indices(self.indices(triples))

    def check_finite(self) -> None:
        if not (np.isfinite(self.entity_vectors).all() and np.isfinite(self.relation_vectors).all()):
            bad = int((~np.isfinite(self.entity_vectors)).any(axis=1).sum())
            raise TrainingError(f"non-finite embeddings detected ({bad} entity rows affected)")

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable(
            self.scorer, self.k, self.entities, self.relations,
            self.entity_vectors.copy(), self.relation_vectors.copy(),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingTable):
            return NotImplemented
        return (
            self.scorer == other.scorer
            and self.k == other.k
            and self.entities == other.entities
            and self.relations == other.relations
            and np.array_equal(self.entity_vectors, other.entity_vectors)
            and np.array_equal(self.relation_vectors, other.relation_vectors)
        )


def score(table: EmbeddingTable, triple: Triple, scorer: Optional[ScorerName] = None) -> float:
    if scorer is not None and ScorerName(scorer) != table.scorer:
        raise ConfigError(f"table was trained with {table.scorer.value}, not {ScorerName(scorer).value}")
    value = float(table.score_triples([triple])[0])
    if not np.isfinite(value):
        raise TrainingError(f"non-finite score for {Triple(*triple)}")
    return value
