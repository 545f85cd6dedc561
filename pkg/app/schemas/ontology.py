from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, validator


class GraphMode(str, Enum):
    VEHICLE = "vehicle"
    PEDESTRIAN = "pedestrian"


class ClassRole(str, Enum):
    GENERIC = "generic"
    INDIVIDUAL = "individual"
    INSTANCE = "instance"
    FEATURE = "feature"
    TARGET = "target"
    RULE = "rule"


class OntologyClassSchema(BaseModel):
    name: str = Field(..., min_length=1)
    description: str = ""
    # None marks an open class whose members are run-time ids (vehicle ids, pedestrian ids)
    instances: Optional[List[str]] = None
    example: Optional[str] = None
    relation: str = Field(..., min_length=1)  # "Possible Relation" column; "Any" for generic entities
    role: ClassRole

    @validator('instances')
    def validate_instances(cls, v):
        if v is None:
            return v
        if not v:
            raise ValueError('closed class must list at least one instance')
        for instance in v:
            if not instance or any(ch.isspace() for ch in instance):
                raise ValueError(f"invalid instance name: {instance!r}")
        if len(set(v)) != len(v):
            raise ValueError('duplicate instance within class')
        return v


class RelationSchema(BaseModel):
    domain: List[str]
    range: List[str]

    @validator('domain', 'range')
    def validate_non_empty(cls, v):
        if not v:
            raise ValueError('relation domain and range must be non-empty')
        return v


class OntologyDocument(BaseModel):
    """On-disk ontology file, one entry per row of the ontology table"""

    name: str
    mode: GraphMode
    classes: List[OntologyClassSchema]
    relations: Dict[str, RelationSchema]
