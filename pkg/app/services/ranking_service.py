import logging
from collections import defaultdict
from typing import Dict, Iterable, Optional, Sequence, Set, Tuple

import numpy as np

from app.core.config import settings
from app.core.errors import ConfigError
from app.schemas.graph import Triple
from app.schemas.training import CorruptSide, RankReport, ScorerName
from app.services.embedding_service import ComplExScorer, EmbeddingTable, get_scorer

logger = logging.getLogger(__name__)

# upper bound on floats materialized per TransE scoring chunk
MAX_CHUNK_ELEMENTS = 4_000_000


def _candidate_scores(table: EmbeddingTable, idx: np.ndarray, side: CorruptSide) -> np.ndarray:
    """(B, E) scores of each triple with its head or tail replaced by every entity"""
    E = table.entity_vectors
    h = E[idx[:, 0]]
    r = table.relation_vectors[idx[:, 1]]
    t = E[idx[:, 2]]

    if table.scorer == ScorerName.COMPLEX:
        # ComplEx is linear in the replaced entity; the gradient is its coefficient vector
        grad_h, _, grad_t = ComplExScorer.gradients(h, r, t)
        coefficients = grad_t if side == CorruptSide.TAIL else grad_h
        return coefficients @ E.T

    scorer = get_scorer(table.scorer)
    fixed = h + r if side == CorruptSide.TAIL else t - r
    rows = max(1, MAX_CHUNK_ELEMENTS // max(1, E.shape[0] * E.shape[1]))
    out = np.empty((idx.shape[0], E.shape[0]), dtype=np.float64)
    for start in range(0, idx.shape[0], rows):
        block = fixed[start:start + rows, None, :]
        if side == CorruptSide.TAIL:
            out[start:start + rows] = scorer.score(block, 0.0, E[None, :, :])
        else:
            out[start:start + rows] = scorer.score(E[None, :, :], 0.0, block)
    return out


def _known_index(known: Iterable[Triple]) -> Tuple[Dict[Tuple[str, str], Set[str]], Dict[Tuple[str, str], Set[str]]]:
    tails: Dict[Tuple[str, str], Set[str]] = defaultdict(set)
    heads: Dict[Tuple[str, str], Set[str]] = defaultdict(set)
    for h, r, t in known:
        tails[(h, r)].add(t)
        heads[(r, t)].add(h)
    return tails, heads


def evaluate_ranks(
    table: EmbeddingTable,
    test_triples: Sequence[Triple],
    known: Optional[Iterable[Triple]] = None,
    side: CorruptSide = CorruptSide.BOTH,
    batch_size: int = settings.KGE_VALID_BATCH_SIZE,
) -> RankReport:
    """
    Filtered ranks of test triples among their head and/or tail corruptions.

    Corruptions that are known-true (in `known` or in the test set) are filtered out.
    Ties take the average rank; optimistic/pessimistic MRR are reported alongside.
    """
    side = CorruptSide(side)
    test_triples = [Triple(*t) for t in test_triples]
    if not test_triples:
        raise ConfigError("evaluate_ranks needs at least one test triple")

    known_set = set(Triple(*t) for t in (known or ()))
    known_set.update(test_triples)
    known_tails, known_heads = _known_index(known_set)

    idx = table.indices(test_triples)
    sides = [CorruptSide.HEAD, CorruptSide.TAIL] if side == CorruptSide.BOTH else [side]
    entity_ids = table.entity_index

    ranks, optimistic, pessimistic = [], [], []
    for start in range(0, len(test_triples), batch_size):
        batch = idx[start:start + batch_size]
        for corrupt_side in sides:
            scores = _candidate_scores(table, batch, corrupt_side)
            for row, (h, r, t) in enumerate(test_triples[start:start + batch_size]):
                row_scores = scores[row]
                if corrupt_side == CorruptSide.TAIL:
                    target = entity_ids[t]
                    filtered = [entity_ids[e] for e in known_tails[(h, r)] if e in entity_ids]
                else:
                    target = entity_ids[h]
                    filtered = [entity_ids[e] for e in known_heads[(r, t)] if e in entity_ids]
                true_score = row_scores[target]
                mask = np.ones(row_scores.shape[0], dtype=bool)
                mask[filtered] = False
                mask[target] = False
                candidates = row_scores[mask]
                greater = int((candidates > true_score).sum())
                equal = int((candidates == true_score).sum())
                optimistic.append(1.0 + greater)
                pessimistic.append(1.0 + greater + equal)
                ranks.append(1.0 + greater + equal / 2.0)

    ranks_arr = np.asarray(ranks)
    return RankReport(
        mrr=float(np.mean(1.0 / ranks_arr)),
        hits_at_1=float(np.mean(ranks_arr <= 1)),
        hits_at_3=float(np.mean(ranks_arr <= 3)),
        hits_at_10=float(np.mean(ranks_arr <= 10)),
        mean_rank=float(np.mean(ranks_arr)),
        ranks=[float(r) for r in ranks_arr],
        optimistic_mrr=float(np.mean(1.0 / np.asarray(optimistic))),
        pessimistic_mrr=float(np.mean(1.0 / np.asarray(pessimistic))),
    )
