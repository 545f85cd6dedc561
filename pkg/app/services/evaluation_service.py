import logging
from collections import Counter, defaultdict
from typing import Callable, Dict, Hashable, Iterable, List, Optional, Sequence, Set, Tuple, TypeVar

import numpy as np

from app.core.errors import ConfigError
from app.schemas.evaluation import ClassMetrics, ClassReport, HorizonResult
from app.schemas.graph import Triple
from app.services.graph_service import TripleStore

logger = logging.getLogger(__name__)

T = TypeVar("T")

SPLIT_SHUFFLES = 8
SPLIT_SEARCH_STEPS = 1_000_000


class _RemovalBudget:
    """Occurrence counts of ids in the training side while triples move to validation"""

    def __init__(self, triples: Sequence[Triple]):
        self.entities: Counter = Counter()
        self.relations: Counter = Counter()
        for h, r, t in triples:
            self.entities[h] += 1
            self.entities[t] += 1
            self.relations[r] += 1

    def fits(self, triple: Triple) -> bool:
        h, r, t = triple
        if self.relations[r] <= 1:
            return False
        return all(self.entities[e] > n for e, n in Counter([h, t]).items())

    def take(self, triple: Triple) -> None:
        h, r, t = triple
        self.relations[r] -= 1
        self.entities[h] -= 1
        self.entities[t] -= 1

    def release(self, triple: Triple) -> None:
        h, r, t = triple
        self.relations[r] += 1
        self.entities[h] += 1
        self.entities[t] += 1

    def greedy(self, order: Sequence[Triple], n_valid: int) -> List[Triple]:
        chosen: List[Triple] = []
        for triple in order:
            if len(chosen) == n_valid:
                break
            if self.fits(triple):
                self.take(triple)
                chosen.append(triple)
        for triple in chosen:
            self.release(triple)
        return chosen

    def search(self, order: Sequence[Triple], n_valid: int, max_steps: int) -> Optional[List[Triple]]:
        """
        Depth-first search over subsets of `order` in lexicographic order of positions.

        Returns the first subset of size n_valid that keeps every id in training,
        None when none exists or max_steps runs out.
        """
        chosen: List[int] = []
        position = 0
        for _ in range(max_steps):
            if len(chosen) == n_valid:
                found = [order[i] for i in chosen]
                for triple in found:
                    self.release(triple)
                return found
            if position < len(order) and len(order) - position >= n_valid - len(chosen):
                if self.fits(order[position]):
                    self.take(order[position])
                    chosen.append(position)
                position += 1
                continue
            if not chosen:
                return None
            last = chosen.pop()
            self.release(order[last])
            position = last + 1
        logger.warning(f"⚠️ Split search gave up after {max_steps} steps")
        for i in chosen:
            self.release(order[i])
        return None


class EvaluationService:

    @staticmethod
    def split_no_unseen(
        store: TripleStore,
        n_valid: int,
        seed: int,
        exclude: Iterable[Triple] = (),
    ) -> Tuple[TripleStore, List[Triple]]:
        """
        Move n_valid triples to a validation set while every entity and relation
        of the validation set keeps at least one occurrence in training.

        Triples in `exclude` always stay in training. Tries a greedy pass over a few
        seeded shuffles, then a backtracking search over the first shuffle; raises
        only when no such split exists (or the search budget runs out).
        """
        if n_valid < 1:
            raise ConfigError("n_valid must be >= 1")
        if n_valid >= len(store):
            raise ConfigError(f"n_valid ({n_valid}) must be smaller than the store ({len(store)} triples)")

        triples = store.sorted_triples()
        excluded: Set[Triple] = {Triple(*t) for t in exclude}
        budget = _RemovalBudget(triples)

        rng = np.random.default_rng(seed)
        first: List[Triple] = []
        valid: List[Triple] = []
        best = 0
        for attempt in range(SPLIT_SHUFFLES):
            order = [triples[i] for i in rng.permutation(len(triples)) if triples[i] not in excluded]
            if attempt == 0:
                first = order
            valid = budget.greedy(order, n_valid)
            if len(valid) == n_valid:
                break
            best = max(best, len(valid))
            logger.debug(f"Greedy split attempt {attempt} found {len(valid)}/{n_valid} validation triples")
        else:
            valid = budget.search(first, n_valid, SPLIT_SEARCH_STEPS) or []
            if len(valid) < n_valid:
                raise ConfigError(
                    f"cannot split {n_valid} validation triples without unseen ids (at most {best} found)"
                )

        valid_set = set(valid)
        train = TripleStore(t for t in triples if t not in valid_set).freeze()
        EvaluationService.check_no_unseen(train, valid)
        logger.info(f"Split {len(train)} training / {len(valid)} validation triples (seed {seed})")
        return train, valid

    @staticmethod
    def check_no_unseen(train: TripleStore, valid: Sequence[Triple]) -> None:
        relations = set(train.relations)
        for h, r, t in valid:
            if not train.has_entity(h) or not train.has_entity(t) or r not in relations:
                raise ConfigError(f"validation triple <{h}, {r}, {t}> has ids unseen in training")

    @staticmethod
    def split_by_group(
        items: Sequence[T],
        key: Callable[[T], Hashable],
        train_fraction: float,
        seed: int,
    ) -> Tuple[List[T], List[T]]:
        """Split items so that all items of one group (track, pedestrian, video) land on the same side"""
        groups: Dict[Hashable, List[T]] = defaultdict(list)
        for item in items:
            groups[key(item)].append(item)
        if len(groups) < 2:
            raise ConfigError("need at least two groups to split")

        ids = sorted(groups, key=str)
        order = np.random.default_rng(seed).permutation(len(ids))
        n_train = min(max(1, int(round(train_fraction * len(ids)))), len(ids) - 1)
        train_ids = {ids[i] for i in order[:n_train]}
        train = [item for item in items if key(item) in train_ids]
        test = [item for item in items if key(item) not in train_ids]
        return train, test

    @staticmethod
    def classification_report(y_true: Sequence[str], y_pred: Sequence[str], labels: Sequence[str]) -> ClassReport:
        if len(y_true) != len(y_pred):
            raise ConfigError(f"y_true and y_pred lengths differ ({len(y_true)} vs {len(y_pred)})")
        if not y_true:
            raise ConfigError("classification_report needs at least one sample")

        per_class: Dict[str, ClassMetrics] = {}
        for label in labels:
            tp = sum(1 for t, p in zip(y_true, y_pred) if t == label and p == label)
            fp = sum(1 for t, p in zip(y_true, y_pred) if t != label and p == label)
            fn = sum(1 for t, p in zip(y_true, y_pred) if t == label and p != label)
            support = tp + fn
            if support == 0:
                logger.warning(f"⚠️ Label {label} has no support; its metrics are reported as 0")
            precision = tp / (tp + fp) if tp + fp else 0.0
            recall = tp / support if support else 0.0
            f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
            per_class[label] = ClassMetrics(precision=precision, recall=recall, f1=f1, support=support)

        n = len(labels)
        return ClassReport(
            labels=list(labels),
            per_class=per_class,
            macro_precision=sum(m.precision for m in per_class.values()) / n,
            macro_recall=sum(m.recall for m in per_class.values()) / n,
            macro_f1=sum(m.f1 for m in per_class.values()) / n,
            accuracy=sum(1 for t, p in zip(y_true, y_pred) if t == p) / len(y_true),
            total=len(y_true),
        )

    @staticmethod
    def format_horizon_table(results: Sequence[HorizonResult]) -> str:
        """One block per horizon in the layout of a per-instant precision/recall/F1 table"""
        blocks = [r.report.format_table(title=f"horizon {r.horizon:g}s") for r in results]
        return "\n\n".join(blocks)


split_no_unseen = EvaluationService.split_no_unseen
classification_report = EvaluationService.classification_report
