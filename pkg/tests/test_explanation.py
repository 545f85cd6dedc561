import numpy as np
import pytest

from app.core.errors import ConfigError
from app.schemas.training import ScorerName
from app.services.bayes_service import BayesService
from app.services.embedding_service import EmbeddingTable
from app.services.explanation_service import ExplanationService, build_corpus, build_query, load_phrases, render_template
from app.services.fuzzy_service import SATISFIES_RULE


@pytest.fixture
def tied_prediction(pedestrian_frame_044, pedestrian_ontology, jaad_rules):
    entities = pedestrian_ontology.closed_instances() + ["R1-ante", "R2-ante"]
    relations = pedestrian_ontology.feature_relations + [pedestrian_ontology.target_relation, SATISFIES_RULE]
    table = EmbeddingTable(
        ScorerName.TRANSE, 2, entities, relations, np.ones((len(entities), 2)), np.zeros((len(relations), 2))
    )
    return BayesService.predict(pedestrian_frame_044, pedestrian_ontology, table, rules=jaad_rules[:2])


class TestTemplate:

    def test_pedestrian_sentence(self, tied_prediction, pedestrian_frame_044):
        text = render_template(tied_prediction, pedestrian_frame_044)
        assert text == (
            "The pedestrian will cross the street (probability 0.50) because the pedestrian is running, "
            "is near the curb, is at a middle distance to the vehicle, is oriented to the left "
            "and is not looking at the vehicle. Activated rules: R1, R2."
        )

    def test_explicit_rule_list(self, tied_prediction, pedestrian_frame_044):
        text = render_template(tied_prediction, pedestrian_frame_044, rules_activated=[])
        assert "Activated rules" not in text
        assert text.endswith("is not looking at the vehicle.")

    def test_vehicle_sentence(self, vehicle_frame, vehicle_ontology, random_table):
        entities = vehicle_ontology.closed_instances()
        relations = vehicle_ontology.feature_relations + [vehicle_ontology.target_relation]
        prediction = BayesService.predict(vehicle_frame, vehicle_ontology, random_table(entities, relations, seed=2))
        text = render_template(prediction, vehicle_frame)
        phrases = load_phrases()
        assert text.startswith(f"The vehicle will {phrases.labels[prediction.chosen]} (probability ")
        assert "has a high collision risk with the left following vehicle" in text
        assert "is moving straight" in text

    def test_unknown_instance_falls_back(self):
        phrases = load_phrases()
        assert ExplanationService.instance_phrase("hovering", "MOTION", phrases) == "has MOTION hovering"

    def test_missing_phrase_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_phrases(tmp_path / "phrases.json")


class TestQueryAndCorpus:

    def test_query(self, tied_prediction, pedestrian_frame_044):
        query = build_query(pedestrian_frame_044, tied_prediction)
        assert query.startswith("Road user video_0044_ped1-12 has the features ATTENTION=NotLooking; ")
        assert "The model predicts crossRoad. Activated rules: R1, R2." in query
        assert query.endswith("Explain the prediction.")

    def test_pedestrian_corpus(self, pedestrian_frame_044, pedestrian_ontology):
        lines = build_corpus([pedestrian_frame_044, pedestrian_frame_044.without_label()], pedestrian_ontology)
        assert lines == [
            "The pedestrian is running, is near the curb, is at a middle distance to the vehicle, "
            "is oriented to the left and is not looking at the vehicle, so the pedestrian will cross the street."
        ]

    def test_vehicle_corpus(self, vehicle_frame, vehicle_ontology):
        lines = build_corpus([vehicle_frame], vehicle_ontology)
        assert len(lines) == 1
        assert lines[0].startswith("<vehicle, HAS_CHILD, 741-0> <741-0, ")
        assert lines[0].endswith("<741-0, INTENTION_IS, LK>")

    def test_write_corpus(self, tmp_path):
        path = tmp_path / "out" / "corpus.txt"
        ExplanationService.write_corpus(["first\nline", "second"], path)
        assert path.read_bytes() == b"first line\nsecond\n"
