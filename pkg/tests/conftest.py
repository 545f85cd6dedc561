from pathlib import Path

import numpy as np
import pytest

from app.core.config import settings
from app.schemas.frames import LinguisticFrame
from app.schemas.training import ScorerName
from app.services.discretizer_service import load_thresholds
from app.services.embedding_service import EmbeddingTable
from app.services.fuzzy_service import parse_rules
from app.services.ontology_service import load_ontology

FIXTURES = Path(__file__).parent / "fixtures"

PEDESTRIAN_044 = {
    "MOTION": "Run",
    "LOCATION": "NearFromCurb",
    "EGO_DISTANCE": "MiddleDisToEgoVeh",
    "ORIENTATION": "LeftDirection",
    "ATTENTION": "NotLooking",
}


def vehicle_assignments(**overrides):
    assignments = {
        "LATERAL_VELOCITY_IS": "movingStraight",
        "LATERAL_ACCELERATION_IS": "zeroAcceleration",
        "TTC_WITH_PRECEDING_VEHICLE_IS": "lowRiskPreceding",
        "TTC_WITH_LEFT_PRECEDING_VEHICLE_IS": "lowRiskLeftPreceding",
        "TTC_WITH_RIGHT_PRECEDING_VEHICLE_IS": "lowRiskRightPreceding",
        "TTC_WITH_LEFT_FOLLOWING_VEHICLE_IS": "lowRiskLeftFollowing",
        "TTC_WITH_RIGHT_FOLLOWING_VEHICLE_IS": "lowRiskRightFollowing",
    }
    assignments.update(overrides)
    return assignments


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def vehicle_ontology():
    return load_ontology(settings.VEHICLE_ONTOLOGY_PATH)


@pytest.fixture(scope="session")
def pedestrian_ontology():
    return load_ontology(settings.PEDESTRIAN_ONTOLOGY_PATH)


@pytest.fixture(scope="session")
def vehicle_thresholds(vehicle_ontology):
    return load_thresholds(settings.VEHICLE_THRESHOLDS_PATH, vehicle_ontology)


@pytest.fixture(scope="session")
def pedestrian_thresholds(pedestrian_ontology):
    return load_thresholds(settings.PEDESTRIAN_THRESHOLDS_PATH, pedestrian_ontology)


@pytest.fixture(scope="session")
def jaad_rules(pedestrian_ontology):
    return parse_rules(settings.PEDESTRIAN_RULES_PATH, pedestrian_ontology)


@pytest.fixture
def vehicle_frame():
    return LinguisticFrame(
        user_id="741",
        frame=0,
        assignments=vehicle_assignments(TTC_WITH_LEFT_FOLLOWING_VEHICLE_IS="highRiskLeftFollowing"),
        label="LK",
    )


@pytest.fixture
def pedestrian_frame_044():
    return LinguisticFrame(user_id="video_0044_ped1", frame=12, assignments=dict(PEDESTRIAN_044), label="crossRoad")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_table():
    """Small TransE table over the pedestrian class-level vocabulary"""

    def build(entities, relations, k=4, seed=0, scorer=ScorerName.TRANSE):
        return EmbeddingTable.initialize(scorer, k, list(entities), list(relations), np.random.default_rng(seed))

    return build
