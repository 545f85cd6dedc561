import logging
import math
import sys
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import ConfigError
from app.schemas.frames import LinguisticFrame
from app.schemas.graph import Triple
from app.schemas.prediction import (
    Calibration,
    EvidenceItem,
    EvidenceKind,
    Hypothesis,
    Prediction,
    TraceEntry,
    TraceFactor,
)
from app.schemas.rules import FuzzyRule
from app.services.embedding_service import EmbeddingTable
from app.services.fuzzy_service import SATISFIES_RULE, FuzzyService
from app.services.ontology_service import Ontology

logger = logging.getLogger(__name__)

DEFAULT_CALIBRATION = Calibration()
MAX_LOG_FLOAT = math.log(sys.float_info.max)


def _log_sigmoid(x: float) -> float:
    return -float(np.logaddexp(0.0, -x))


def _exp_or_none(x: float) -> Optional[float]:
    """exp(x), or None when it overflows a double; underflow gives 0.0"""
    if x >= MAX_LOG_FLOAT:
        return None
    return math.exp(x)


class BayesService:
    """
    Naive Bayes over reified triples scored by an embedding model:

        P(h | e) = P(h) * prod_i P(e_i | h) / prod_i P(e_i)

    P(h) scores <generic, TARGET, label>, P(e_i) scores <generic, FEATURE, instance>
    and P(e_i | h) scores <instance, TARGET, label>. Products are sums of logs.
    """

    @staticmethod
    def log_triple_probability(
        table: EmbeddingTable, triple: Triple, calibration: Optional[Calibration] = None
    ) -> Tuple[float, float]:
        """(raw score, log probability) of a triple; unseen triples are fine, unseen entities are not"""
        calibration = calibration or DEFAULT_CALIBRATION
        raw = float(table.score_triples([triple])[0])
        return raw, _log_sigmoid(calibration.a * raw + calibration.b)

    @staticmethod
    def triple_probability(table: EmbeddingTable, triple: Triple, calibration: Optional[Calibration] = None) -> float:
        _, log_p = BayesService.log_triple_probability(table, triple, calibration)
        return math.exp(log_p)

    @staticmethod
    def hypotheses(ontology: Ontology, labels: Optional[Sequence[str]] = None) -> List[Hypothesis]:
        labels = list(labels) if labels is not None else ontology.target_labels
        for label in labels:
            if label not in ontology.target_labels:
                raise ConfigError(f"{label} is not a prediction target of {ontology.name}")
        return [Hypothesis(subject=ontology.generic_entity, relation=ontology.target_relation, label=l) for l in labels]

    @staticmethod
    def evidence_from_frame(
        frame: LinguisticFrame, ontology: Ontology, rules: Sequence[FuzzyRule] = ()
    ) -> List[EvidenceItem]:
        """Feature evidence in ontology order, then the frame's activated rules in file order"""
        subject = ontology.generic_entity
        evidence = [
            EvidenceItem(instance=frame.assignments[relation], relation=relation, subject=subject, frame_id=frame.instance_id)
            for relation in ontology.feature_relations
            if relation in frame.assignments
        ]
        for rule in FuzzyService.matching_rules(rules, frame):
            evidence.append(
                EvidenceItem(
                    instance=rule.antecedent_entity,
                    relation=SATISFIES_RULE,
                    subject=subject,
                    frame_id=frame.instance_id,
                    kind=EvidenceKind.RULE,
                    rule_id=rule.id,
                )
            )
        return evidence

    @staticmethod
    def prior(h: Hypothesis, table: EmbeddingTable, calibration: Optional[Calibration] = None) -> float:
        return BayesService.triple_probability(table, h.triple, calibration)

    @staticmethod
    def log_evidence_marginal(
        evidence: Sequence[EvidenceItem], table: EmbeddingTable, calibration: Optional[Calibration] = None
    ) -> float:
        if not evidence:
            raise ConfigError("evidence must contain at least one item")
        return sum(BayesService.log_triple_probability(table, e.marginal_triple, calibration)[1] for e in evidence)

    @staticmethod
    def evidence_marginal(
        evidence: Sequence[EvidenceItem], table: EmbeddingTable, calibration: Optional[Calibration] = None
    ) -> float:
        return math.exp(BayesService.log_evidence_marginal(evidence, table, calibration))

    @staticmethod
    def log_likelihood(
        evidence: Sequence[EvidenceItem], h: Hypothesis, table: EmbeddingTable, calibration: Optional[Calibration] = None
    ) -> float:
        if not evidence:
            raise ConfigError("evidence must contain at least one item")
        return sum(BayesService.log_triple_probability(table, e.likelihood_triple(h), calibration)[1] for e in evidence)

    @staticmethod
    def likelihood(
        evidence: Sequence[EvidenceItem], h: Hypothesis, table: EmbeddingTable, calibration: Optional[Calibration] = None
    ) -> float:
        return math.exp(BayesService.log_likelihood(evidence, h, table, calibration))

    @staticmethod
    def predict(
        frame: LinguisticFrame,
        ontology: Ontology,
        table: EmbeddingTable,
        calibration: Optional[Calibration] = None,
        labels: Optional[Sequence[str]] = None,
        rules: Sequence[FuzzyRule] = (),
    ) -> Prediction:
        """
        Posterior of every label with a complete trace.

        Ties go to the label declared first in the ontology. Posteriors are not
        normalized across labels; `normalized` is the softmax view of the log posteriors.
        """
        hypotheses = BayesService.hypotheses(ontology, labels)
        evidence = BayesService.evidence_from_frame(frame, ontology, rules)
        if not evidence:
            raise ConfigError(f"frame {frame.instance_id} carries no evidence")

        trace: List[TraceEntry] = []

        def scored(triple: Triple, factor: TraceFactor, label: Optional[str] = None) -> float:
            raw, log_p = BayesService.log_triple_probability(table, triple, calibration)
            trace.append(
                TraceEntry(
                    head=triple.head, relation=triple.relation, tail=triple.tail,
                    score=raw, probability=math.exp(log_p), factor=factor, label=label,
                )
            )
            return log_p

        log_marginal = sum(scored(e.marginal_triple, TraceFactor.MARGINAL) for e in evidence)

        log_priors, log_likelihoods, log_posteriors = {}, {}, {}
        for h in hypotheses:
            log_priors[h.label] = scored(h.triple, TraceFactor.PRIOR, h.label)
            log_likelihoods[h.label] = sum(
                scored(e.likelihood_triple(h), TraceFactor.LIKELIHOOD, h.label) for e in evidence
            )
            log_posteriors[h.label] = log_priors[h.label] + log_likelihoods[h.label] - log_marginal

        order = [h.label for h in hypotheses]
        chosen = order[0]
        for label in order[1:]:
            if log_posteriors[label] > log_posteriors[chosen]:
                chosen = label

        values = np.array([log_posteriors[l] for l in order])
        shifted = np.exp(values - values.max())
        normalized = shifted / shifted.sum()

        prediction = Prediction(
            frame_id=frame.instance_id,
            labels=order,
            chosen=chosen,
            posteriors={l: _exp_or_none(log_posteriors[l]) for l in order},
            normalized={l: float(p) for l, p in zip(order, normalized)},
            log_posteriors=log_posteriors,
            priors={l: math.exp(v) for l, v in log_priors.items()},
            likelihoods={l: math.exp(v) for l, v in log_likelihoods.items()},
            marginal=math.exp(log_marginal),
            evidence=evidence,
            trace=trace,
            activated_rules=[e.rule_id for e in evidence if e.kind == EvidenceKind.RULE],
        )
        logger.debug(f"{frame.instance_id}: predicted {chosen} ({prediction.normalized[chosen]:.3f})")
        return prediction

    @staticmethod
    def fit_platt(scores: Sequence[float], targets: Sequence[int], max_iter: int = 100, tol: float = 1e-10) -> Calibration:
        """
        Fit sigma(a * score + b) to binary targets by Newton's method with backtracking,
        starting from the identity calibration (1, 0) so the log-loss never increases.
        """
        s = np.asarray(scores, dtype=np.float64)
        y = np.asarray(targets, dtype=np.float64)
        if s.shape != y.shape or s.size == 0:
            raise ConfigError("scores and targets must be non-empty and equally long")
        if not np.isin(y, (0.0, 1.0)).all():
            raise ConfigError("targets must be 0 or 1")

        def log_loss(params: np.ndarray) -> float:
            z = params[0] * s + params[1]
            return float(np.mean(np.logaddexp(0.0, z) - y * z))

        params = np.array([1.0, 0.0])
        current = log_loss(params)
        X = np.stack([s, np.ones_like(s)], axis=1)
        for _ in range(max_iter):
            z = X @ params
            p = np.exp(-np.logaddexp(0.0, -z))
            gradient = X.T @ (p - y) / s.size
            hessian = (X * (p * (1 - p))[:, None]).T @ X / s.size + 1e-9 * np.eye(2)
            step = np.linalg.solve(hessian, gradient)
            scale = 1.0
            while scale > 1e-8:
                candidate = params - scale * step
                value = log_loss(candidate)
                if value <= current:
                    break
                scale /= 2.0
            else:
                break
            improvement = current - value
            params, current = candidate, value
            if improvement < tol:
                break

        logger.info(f"Platt calibration a={params[0]:.4f} b={params[1]:.4f} (log-loss {current:.4f})")
        return Calibration(a=float(params[0]), b=float(params[1]))
