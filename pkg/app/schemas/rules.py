from typing import Dict, List

from pydantic import BaseModel, Field, validator

from app.schemas.graph import Triple


class FuzzyRule(BaseModel):
    """IF feature=value AND ... THEN target=label WITH weight"""

    id: str = Field(..., min_length=1)
    # feature relation -> linguistic instance
    antecedents: Dict[str, str]
    consequent_relation: str = Field(..., min_length=1)
    consequent: str = Field(..., min_length=1)
    weight: float

    @validator('id')
    def validate_id(cls, v):
        if any(ch.isspace() for ch in v) or ':' in v:
            raise ValueError(f"invalid rule id: {v!r}")
        return v

    @validator('antecedents')
    def validate_antecedents(cls, v):
        if not v:
            raise ValueError('rule must have at least one antecedent')
        return v

    @validator('weight')
    def validate_weight(cls, v):
        if not (0.0 < v <= 1.0):
            raise ValueError('weight must be in (0,1]')
        return v

    @property
    def antecedent_entity(self) -> str:
        return f"{self.id}-ante"

    @property
    def consequent_entity(self) -> str:
        return f"{self.id}-cons"


class RuleTripleBundle(BaseModel):
    rule_id: str
    antecedent_entity: str
    consequent_entity: str
    triples: List[Triple]

    @property
    def new_entities(self) -> List[str]:
        return [self.antecedent_entity, self.consequent_entity]
