import json
import logging
from functools import lru_cache
from pathlib import Path
from typing import List, Optional, Sequence, Union

from pydantic import ValidationError

from app.core.config import settings
from app.core.errors import ConfigError
from app.schemas.explain import PhraseTable
from app.schemas.frames import LinguisticFrame
from app.schemas.ontology import GraphMode
from app.schemas.prediction import EvidenceKind, Prediction
from app.schemas.records import VEHICLE_LABELS
from app.services.graph_service import GraphService
from app.services.ontology_service import Ontology

logger = logging.getLogger(__name__)


@lru_cache(maxsize=8)
def _load_phrases(path: str) -> PhraseTable:
    try:
        return PhraseTable(**json.loads(Path(path).read_text(encoding="utf-8")))
    except FileNotFoundError:
        raise ConfigError(f"phrase file not found: {path}")
    except (json.JSONDecodeError, ValidationError, TypeError) as e:
        raise ConfigError(f"invalid phrase file {path}: {e}")


def load_phrases(path: Union[str, Path] = settings.PHRASES_PATH) -> PhraseTable:
    return _load_phrases(str(path))


def _join(parts: Sequence[str]) -> str:
    if len(parts) <= 1:
        return "".join(parts)
    return ", ".join(parts[:-1]) + " and " + parts[-1]


class ExplanationService:
    """Template explanations, RAG queries and the explanation corpus"""

    @staticmethod
    def _mode_for(label: str) -> GraphMode:
        return GraphMode.VEHICLE if label in VEHICLE_LABELS else GraphMode.PEDESTRIAN

    @staticmethod
    def instance_phrase(instance: str, relation: str, phrases: PhraseTable) -> str:
        return phrases.instances.get(instance, f"has {relation} {instance}")

    @staticmethod
    def render_template(
        pred: Prediction,
        frame: LinguisticFrame,
        rules_activated: Optional[Sequence[str]] = None,
        phrases: Optional[PhraseTable] = None,
    ) -> str:
        """One sentence naming the predicted label, every feature of the evidence in order and the activated rules"""
        phrases = phrases or load_phrases()
        mode = ExplanationService._mode_for(pred.chosen)
        subject = phrases.subjects.get(mode.value, "The road user")
        label = phrases.labels.get(pred.chosen, pred.chosen)

        features = [
            ExplanationService.instance_phrase(e.instance, e.relation, phrases)
            for e in pred.evidence
            if e.kind == EvidenceKind.FEATURE
        ]
        text = f"{subject} will {label} (probability {pred.normalized[pred.chosen]:.2f})"
        if features:
            text += f" because {subject[0].lower() + subject[1:]} {_join(features)}"
        text += "."

        rules = list(rules_activated) if rules_activated is not None else list(pred.activated_rules)
        if rules:
            text += " " + phrases.rules.format(rules=", ".join(rules))
        return text

    @staticmethod
    def build_query(frame: LinguisticFrame, pred: Prediction) -> str:
        features = "; ".join(f"{relation}={instance}" for relation, instance in sorted(frame.assignments.items()))
        query = f"Road user {frame.instance_id} has the features {features}. The model predicts {pred.chosen}."
        if pred.activated_rules:
            query += f" Activated rules: {', '.join(pred.activated_rules)}."
        return query + " Explain the prediction."

    @staticmethod
    def build_corpus(
        frames: Sequence[LinguisticFrame],
        ontology: Ontology,
        phrases: Optional[PhraseTable] = None,
    ) -> List[str]:
        """
        Source database for retrieval: one line per labelled frame.

        Pedestrian frames become explanation sentences; vehicle frames become
        listings of their triples ending in the intention triple.
        """
        phrases = phrases or load_phrases()
        lines = []
        for frame in frames:
            if frame.label is None:
                continue
            if ontology.mode == GraphMode.VEHICLE:
                triples = GraphService.frame_to_triples(frame, ontology)
                lines.append(" ".join(str(t) for t in triples))
                continue
            subject = phrases.subjects.get(ontology.mode.value, "The road user")
            features = [
                ExplanationService.instance_phrase(frame.assignments[r], r, phrases)
                for r in ontology.feature_relations
                if r in frame.assignments
            ]
            label = phrases.labels.get(frame.label, frame.label)
            lines.append(f"{subject} {_join(features)}, so {subject[0].lower() + subject[1:]} will {label}.")
        logger.info(f"Built explanation corpus with {len(lines)} lines")
        return lines

    @staticmethod
    def write_corpus(lines: Sequence[str], path: Union[str, Path]) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            for line in lines:
                fh.write(line.replace("\n", " ") + "\n")
        logger.info(f"✅ Wrote corpus of {len(lines)} lines to {path}")


render_template = ExplanationService.render_template
build_query = ExplanationService.build_query
build_corpus = ExplanationService.build_corpus
