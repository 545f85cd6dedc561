import math
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, validator

VEHICLE_LABELS = ("LLC", "LK", "RLC")
PEDESTRIAN_LABELS = ("crossRoad", "noCrossRoad")


class ScenarioKind(str, Enum):
    VEHICLE = "vehicle"
    PEDESTRIAN = "pedestrian"


class VehicleFrameRecord(BaseModel):
    track_id: str = Field(..., min_length=1)
    frame: int = Field(..., ge=0)
    lat_velocity: float  # m/s, left-positive
    lat_acceleration: float  # m/s^2, left-positive
    # TTC values in seconds; None means no interacting vehicle
    ttc_preceding: Optional[float] = None
    ttc_left_preceding: Optional[float] = None
    ttc_right_preceding: Optional[float] = None
    ttc_left_following: Optional[float] = None
    ttc_right_following: Optional[float] = None
    label: Optional[str] = None
    horizon: Optional[float] = None  # seconds before the lane-marking crossing

    @validator('lat_velocity', 'lat_acceleration')
    def validate_finite(cls, v):
        if not math.isfinite(v):
            raise ValueError('kinematic values must be finite')
        return v

    @validator(
        'ttc_preceding', 'ttc_left_preceding', 'ttc_right_preceding',
        'ttc_left_following', 'ttc_right_following',
    )
    def validate_ttc(cls, v):
        if v is None or not math.isfinite(v):
            return None
        if v <= 0:
            raise ValueError('TTC must be positive')
        return v

    @validator('label')
    def validate_label(cls, v):
        if v is not None and v not in VEHICLE_LABELS:
            raise ValueError(f"unknown vehicle label: {v}")
        return v


class PedestrianFrameRecord(BaseModel):
    ped_id: str = Field(..., min_length=1)
    frame: int = Field(..., ge=0)
    activity: str = Field(..., min_length=1)  # raw motion activity class
    dist_ego: float = Field(..., ge=0)  # meters
    dist_curb: float = Field(..., ge=0)  # meters
    orientation_deg: float
    gaze: bool  # looking at the ego-vehicle
    cross_label: Optional[bool] = None  # crosses within the next 30 frames

    @validator('orientation_deg')
    def validate_orientation(cls, v):
        if not (0.0 <= v < 360.0):
            raise ValueError('orientation out of range')
        return v

    @validator('ped_id')
    def validate_ped_id(cls, v):
        if any(ch.isspace() for ch in v):
            raise ValueError('pedId must not contain whitespace')
        return v

    @property
    def label(self) -> Optional[str]:
        if self.cross_label is None:
            return None
        return "crossRoad" if self.cross_label else "noCrossRoad"


class ScenarioSpec(BaseModel):
    kind: ScenarioKind = ScenarioKind.VEHICLE
    seed: int = 7
    counts: Dict[str, int]
    noise: float = Field(0.0, ge=0.0, le=1.0)
    horizons: List[float] = Field(default_factory=lambda: [1.0, 2.0, 3.0, 4.0])
    frames_per_pedestrian: int = Field(5, ge=1)

    @validator('counts')
    def validate_counts(cls, v, values):
        kind = values.get('kind', ScenarioKind.VEHICLE)
        allowed = VEHICLE_LABELS if kind == ScenarioKind.VEHICLE else PEDESTRIAN_LABELS
        for label, count in v.items():
            if label not in allowed:
                raise ValueError(f"unknown label for {kind.value} scenario: {label}")
            if count < 0:
                raise ValueError('counts must be >= 0')
        if not any(count > 0 for count in v.values()):
            raise ValueError('at least one label count must be positive')
        return v

    @validator('horizons')
    def validate_horizons(cls, v):
        if not v or any(h <= 0 for h in v):
            raise ValueError('horizons must be positive seconds')
        return v
