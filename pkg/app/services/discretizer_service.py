import json
import logging
import math
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
from pydantic import ValidationError

from app.core.errors import ConfigError, DataFormatError, OntologyError
from app.schemas.frames import LinguisticFrame
from app.schemas.ontology import GraphMode
from app.schemas.records import PedestrianFrameRecord, VehicleFrameRecord
from app.schemas.thresholds import CategoricalThresholds, NumericThresholds, OrientationThresholds, ThresholdConfig
from app.services.ontology_service import Ontology

logger = logging.getLogger(__name__)

VEHICLE_FEATURES = (
    "lat_velocity",
    "lat_acceleration",
    "ttc_preceding",
    "ttc_left_preceding",
    "ttc_right_preceding",
    "ttc_left_following",
    "ttc_right_following",
)
PEDESTRIAN_NUMERIC_FEATURES = ("dist_ego", "dist_curb")
PEDESTRIAN_CATEGORICAL_FEATURES = ("activity", "gaze")


class DiscretizerService:
    """Linguistic transformation of numeric records into frames of ontology categories"""

    @staticmethod
    def categorize(value: Optional[float], feature: NumericThresholds) -> str:
        """
        Category of the half-open interval [low, high) containing value.

        A value exactly on a breakpoint belongs to the upper category; the last
        interval is closed above by +inf. None maps to the feature's missing category.
        """
        if value is None:
            if feature.missing is None:
                raise DataFormatError(f"{feature.relation}: value is missing and no missing category is configured")
            return feature.missing
        if not math.isfinite(value):
            raise DataFormatError(f"{feature.relation}: non-finite value {value}")
        index = int(np.searchsorted(feature.breakpoints, value, side="right"))
        return feature.categories[index]

    @staticmethod
    def orientation_category(degrees: float, cfg: OrientationThresholds) -> str:
        """Sector around the nearest quadrant center; sector bounds sit halfway between centers"""
        centers = cfg.centers
        n = len(centers)
        angle = degrees % 360.0
        for i, center in enumerate(centers):
            previous = centers[i - 1] if i > 0 else centers[-1] - 360.0
            following = centers[i + 1] if i < n - 1 else centers[0] + 360.0
            low = (center + previous) / 2.0
            width = (following - previous) / 2.0
            if (angle - low) % 360.0 < width:
                return cfg.categories[i]
        # unreachable: sectors partition the circle
        raise DataFormatError(f"orientation {degrees} not covered by any sector")

    @staticmethod
    def map_categorical(raw: str, feature: CategoricalThresholds) -> str:
        if raw in feature.mapping:
            return feature.mapping[raw]
        lowered = raw.strip().lower()
        if lowered in feature.mapping:
            return feature.mapping[lowered]
        raise DataFormatError(f"{feature.relation}: unmapped value {raw!r}")

    @staticmethod
    def validate_config(cfg: ThresholdConfig, ontology: Ontology) -> ThresholdConfig:
        """Check that every configured category is an instance of the relation's range class"""
        if cfg.mode != ontology.mode:
            raise ConfigError(f"threshold config {cfg.name} is for {cfg.mode.value}, ontology is {ontology.mode.value}")

        groups: Dict[str, list] = {}
        for feature in cfg.numeric.values():
            groups[feature.relation] = list(feature.categories)
        if cfg.orientation is not None:
            groups[cfg.orientation.relation] = list(cfg.orientation.categories)
        for feature in cfg.categorical.values():
            groups[feature.relation] = list(feature.mapping.values())

        for relation, categories in groups.items():
            allowed = set(ontology.range_instances(relation))
            for category in categories:
                if category not in allowed:
                    raise OntologyError(f"category missing from ontology: {category} ({relation})")
        return cfg

    @staticmethod
    def _require(cfg: ThresholdConfig, mode: GraphMode) -> None:
        if cfg.mode != mode:
            raise ConfigError(f"threshold config {cfg.name} is not a {mode.value} config")
        if mode == GraphMode.VEHICLE:
            missing = [f for f in VEHICLE_FEATURES if f not in cfg.numeric]
        else:
            missing = [f for f in PEDESTRIAN_NUMERIC_FEATURES if f not in cfg.numeric]
            missing += [f for f in PEDESTRIAN_CATEGORICAL_FEATURES if f not in cfg.categorical]
            if cfg.orientation is None:
                missing.append("orientation")
        if missing:
            raise ConfigError(f"threshold config {cfg.name} does not cover: {', '.join(missing)}")

    @staticmethod
    def discretize_vehicle(rec: VehicleFrameRecord, cfg: ThresholdConfig) -> LinguisticFrame:
        DiscretizerService._require(cfg, GraphMode.VEHICLE)
        assignments = {
            cfg.numeric[feature].relation: DiscretizerService.categorize(getattr(rec, feature), cfg.numeric[feature])
            for feature in VEHICLE_FEATURES
        }
        return LinguisticFrame(user_id=rec.track_id, frame=rec.frame, assignments=assignments, label=rec.label)

    @staticmethod
    def discretize_pedestrian(rec: PedestrianFrameRecord, cfg: ThresholdConfig) -> LinguisticFrame:
        DiscretizerService._require(cfg, GraphMode.PEDESTRIAN)
        assignments = {
            cfg.numeric[feature].relation: DiscretizerService.categorize(getattr(rec, feature), cfg.numeric[feature])
            for feature in PEDESTRIAN_NUMERIC_FEATURES
        }
        assignments[cfg.orientation.relation] = DiscretizerService.orientation_category(rec.orientation_deg, cfg.orientation)
        activity = cfg.categorical["activity"]
        assignments[activity.relation] = DiscretizerService.map_categorical(rec.activity, activity)
        gaze = cfg.categorical["gaze"]
        assignments[gaze.relation] = DiscretizerService.map_categorical("1" if rec.gaze else "0", gaze)
        return LinguisticFrame(user_id=rec.ped_id, frame=rec.frame, assignments=assignments, label=rec.label)


def load_thresholds(path: Union[str, Path], ontology: Optional[Ontology] = None) -> ThresholdConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"threshold file not found: {path}")
    try:
        cfg = ThresholdConfig(**json.loads(path.read_text(encoding="utf-8")))
    except json.JSONDecodeError as e:
        raise ConfigError(f"cannot parse threshold file {path}: {e}")
    except (ValidationError, TypeError) as e:
        raise ConfigError(f"invalid threshold file {path}: {e}")
    if ontology is not None:
        DiscretizerService.validate_config(cfg, ontology)
    logger.info(f"Loaded thresholds {cfg.name} for {len(cfg.relations)} features")
    return cfg
