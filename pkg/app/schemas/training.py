from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field, validator

from app.core.config import settings


class ScorerName(str, Enum):
    TRANSE = "TransE"
    COMPLEX = "ComplEx"


class CorruptSide(str, Enum):
    HEAD = "head"
    TAIL = "tail"
    BOTH = "both"


class TrainConfig(BaseModel):
    scorer: ScorerName = ScorerName(settings.KGE_SCORER)
    k: int = Field(settings.KGE_K, ge=1)
    negatives: int = Field(settings.KGE_NEGATIVES, ge=1)
    learning_rate: float = Field(settings.KGE_LEARNING_RATE, gt=0)
    batch_size: int = Field(settings.KGE_BATCH_SIZE, ge=1)
    max_epochs: int = Field(settings.KGE_MAX_EPOCHS, ge=1)
    patience: int = Field(settings.KGE_PATIENCE, ge=1)
    burn_in: int = Field(settings.KGE_BURN_IN, ge=0)
    frequency: int = Field(settings.KGE_FREQUENCY, ge=1)
    valid_batch_size: int = Field(settings.KGE_VALID_BATCH_SIZE, ge=1)
    margin: float = Field(settings.KGE_MARGIN, ge=0)
    temperature: float = Field(settings.KGE_TEMPERATURE, ge=0)
    seed: int = settings.DEFAULT_SEED
    progress: bool = False

    @validator('learning_rate', 'margin', 'temperature')
    def validate_finite(cls, v):
        if v != v or v in (float("inf"), float("-inf")):
            raise ValueError('training hyperparameters must be finite')
        return v


class RankReport(BaseModel):
    mrr: float
    hits_at_1: float
    hits_at_3: float
    hits_at_10: float
    mean_rank: float
    # average-tie ranks, one per (test triple, corrupted side)
    ranks: List[float] = Field(default_factory=list)
    optimistic_mrr: Optional[float] = None
    pessimistic_mrr: Optional[float] = None

    @validator('hits_at_10')
    def validate_hits(cls, v, values):
        if not (values.get('hits_at_1', 0.0) <= values.get('hits_at_3', 0.0) <= v):
            raise ValueError('hits@k must be non-decreasing in k')
        return v


class ValidationRecord(BaseModel):
    epoch: int
    mrr: float
    improved: bool
