from enum import Enum
from typing import NamedTuple

from pydantic import BaseModel


class Triple(NamedTuple):
    head: str
    relation: str
    tail: str

    def __str__(self) -> str:
        return f"<{self.head}, {self.relation}, {self.tail}>"


class GraphVariant(str, Enum):
    DRIVER = "DriverKG"
    PED_FEAT = "PedFeatKG"
    PED_FEAT_RULES = "PedFeatRulesKG"


class GraphStats(BaseModel):
    ontology: str
    variant: GraphVariant
    triples: int
    entities: int
    relations: int
