from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, Field, validator

from app.core.config import settings
from app.schemas.evaluation import SplitSpec
from app.schemas.graph import GraphVariant
from app.schemas.ontology import GraphMode
from app.schemas.training import TrainConfig

DEFAULT_VARIANTS = {
    GraphMode.VEHICLE: GraphVariant.DRIVER,
    GraphMode.PEDESTRIAN: GraphVariant.PED_FEAT,
}


def _must_exist(v: Optional[Path], what: str) -> Optional[Path]:
    if v is not None and not Path(v).is_file():
        raise ValueError(f"{what} not found: {v}")
    return v


class RunConfig(BaseModel):
    """Merged settings, config file and command-line flags of one run"""

    mode: GraphMode = GraphMode.VEHICLE
    variant: Optional[GraphVariant] = None
    seed: Optional[int] = None

    data_path: Optional[Path] = None
    ontology_path: Optional[Path] = None
    thresholds_path: Optional[Path] = None
    rules_path: Optional[Path] = None
    checkpoint_path: Optional[Path] = None
    calibration_path: Optional[Path] = None
    corpus_path: Optional[Path] = None
    output_dir: Path = settings.RUNS_DIR

    train: TrainConfig = Field(default_factory=TrainConfig)
    split: SplitSpec = Field(default_factory=SplitSpec)
    horizons: List[float] = Field(default_factory=lambda: [1.0, 2.0, 3.0, 4.0])
    frame_stride: int = Field(settings.PEDESTRIAN_FRAME_STRIDE, ge=1)
    inject_reified: bool = True
    calibrate: bool = False

    @validator('variant', always=True)
    def validate_variant(cls, v, values):
        mode = values.get('mode', GraphMode.VEHICLE)
        if v is None:
            return DEFAULT_VARIANTS[mode]
        if (mode == GraphMode.VEHICLE) != (v == GraphVariant.DRIVER):
            raise ValueError(f"variant {v.value} does not fit mode {mode.value}")
        return v

    @validator('data_path')
    def validate_data_path(cls, v):
        return _must_exist(v, "data file")

    @validator('ontology_path', always=True)
    def validate_ontology_path(cls, v, values):
        if v is None:
            mode = values.get('mode', GraphMode.VEHICLE)
            v = settings.VEHICLE_ONTOLOGY_PATH if mode == GraphMode.VEHICLE else settings.PEDESTRIAN_ONTOLOGY_PATH
        return _must_exist(v, "ontology file")

    @validator('thresholds_path', always=True)
    def validate_thresholds_path(cls, v, values):
        if v is None:
            mode = values.get('mode', GraphMode.VEHICLE)
            v = settings.VEHICLE_THRESHOLDS_PATH if mode == GraphMode.VEHICLE else settings.PEDESTRIAN_THRESHOLDS_PATH
        return _must_exist(v, "threshold file")

    @validator('rules_path', always=True)
    def validate_rules_path(cls, v, values):
        if v is None and values.get('variant') == GraphVariant.PED_FEAT_RULES:
            v = settings.PEDESTRIAN_RULES_PATH
        return _must_exist(v, "rule file")

    @validator('calibration_path', 'corpus_path')
    def validate_optional_inputs(cls, v):
        return _must_exist(v, "input file")

    @validator('train', always=True)
    def apply_seed_to_train(cls, v, values):
        seed = values.get('seed')
        return v.model_copy(update={"seed": seed}) if seed is not None else v

    @validator('split', always=True)
    def apply_seed_to_split(cls, v, values):
        seed = values.get('seed')
        return v.model_copy(update={"seed": seed}) if seed is not None else v

    @property
    def effective_seed(self) -> int:
        return self.seed if self.seed is not None else self.train.seed

    @property
    def uses_rules(self) -> bool:
        return self.variant == GraphVariant.PED_FEAT_RULES
