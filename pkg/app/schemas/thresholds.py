import math
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, validator

from app.schemas.ontology import GraphMode


class NumericThresholds(BaseModel):
    """Ordered breakpoints of one numeric feature and the categories they induce"""

    relation: str = Field(..., min_length=1)
    unit: str = ""
    breakpoints: List[float]
    categories: List[str]
    # category used when the value is absent (no interacting vehicle)
    missing: Optional[str] = None

    @validator('breakpoints')
    def validate_breakpoints(cls, v):
        if any(not math.isfinite(b) for b in v):
            raise ValueError('breakpoints must be finite')
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError('breakpoints must be strictly increasing')
        return v

    @validator('categories')
    def validate_categories(cls, v, values):
        breakpoints = values.get('breakpoints')
        if breakpoints is not None and len(v) != len(breakpoints) + 1:
            raise ValueError('category count must equal breakpoint count + 1')
        if len(set(v)) != len(v):
            raise ValueError('duplicate category')
        return v

    @validator('missing')
    def validate_missing(cls, v, values):
        if v is not None and v not in values.get('categories', []):
            raise ValueError(f"missing-value category {v} is not one of the categories")
        return v


class OrientationThresholds(BaseModel):
    """Body orientation sectors around quadrant centers, in degrees"""

    relation: str = Field(..., min_length=1)
    unit: str = "deg"
    centers: List[float]
    categories: List[str]

    @validator('centers')
    def validate_centers(cls, v):
        if len(v) < 2:
            raise ValueError('at least two orientation centers are required')
        if any(not (0.0 <= c < 360.0) for c in v):
            raise ValueError('orientation centers must lie in [0, 360)')
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError('orientation centers must be strictly increasing')
        return v

    @validator('categories')
    def validate_categories(cls, v, values):
        centers = values.get('centers')
        if centers is not None and len(v) != len(centers):
            raise ValueError('one category per orientation center')
        if len(set(v)) != len(v):
            raise ValueError('duplicate category')
        return v


class CategoricalThresholds(BaseModel):
    relation: str = Field(..., min_length=1)
    mapping: Dict[str, str]

    @validator('mapping')
    def validate_mapping(cls, v):
        if not v:
            raise ValueError('categorical mapping must be non-empty')
        return v


class ThresholdConfig(BaseModel):
    """
    Linguistic transformation table of one use case.

    Keys of numeric/categorical are record field names (lat_velocity, dist_curb, gaze...).
    """

    name: str = "thresholds"
    mode: GraphMode
    numeric: Dict[str, NumericThresholds] = Field(default_factory=dict)
    orientation: Optional[OrientationThresholds] = None
    categorical: Dict[str, CategoricalThresholds] = Field(default_factory=dict)

    @property
    def relations(self) -> List[str]:
        relations = [f.relation for f in self.numeric.values()]
        if self.orientation is not None:
            relations.append(self.orientation.relation)
        relations.extend(f.relation for f in self.categorical.values())
        return relations
