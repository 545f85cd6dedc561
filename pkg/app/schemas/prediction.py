import math
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, validator

from app.schemas.graph import Triple


class EvidenceKind(str, Enum):
    FEATURE = "feature"
    RULE = "rule"


class TraceFactor(str, Enum):
    PRIOR = "prior"
    LIKELIHOOD = "likelihood"
    MARGINAL = "marginal"


class Calibration(BaseModel):
    """Score -> probability map sigma(a * score + b)"""

    a: float = 1.0
    b: float = 0.0

    @validator('a', 'b')
    def validate_finite(cls, v):
        if not math.isfinite(v):
            raise ValueError('calibration parameters must be finite')
        return v


class Hypothesis(BaseModel):
    subject: str  # generic entity, e.g. vehicle
    relation: str  # target relation, e.g. INTENTION_IS
    label: str

    @property
    def triple(self) -> Triple:
        return Triple(self.subject, self.relation, self.label)


class EvidenceItem(BaseModel):
    instance: str  # linguistic category or rule antecedent entity
    relation: str  # feature relation, or SATISFIES_RULE for rule evidence
    subject: str  # generic entity the marginal triple is scored on
    frame_id: Optional[str] = None
    kind: EvidenceKind = EvidenceKind.FEATURE
    rule_id: Optional[str] = None  # set for rule evidence

    @property
    def marginal_triple(self) -> Triple:
        return Triple(self.subject, self.relation, self.instance)

    def likelihood_triple(self, hypothesis: Hypothesis) -> Triple:
        return Triple(self.instance, hypothesis.relation, hypothesis.label)


class TraceEntry(BaseModel):
    head: str
    relation: str
    tail: str
    score: float
    probability: float
    factor: TraceFactor
    label: Optional[str] = None  # hypothesis label for prior/likelihood factors


class Prediction(BaseModel):
    frame_id: str
    labels: List[str]
    chosen: str
    # prior * likelihood / marginal per label, not normalized across labels;
    # exp of log_posteriors, None where that overflows a double
    posteriors: Dict[str, Optional[float]]
    normalized: Dict[str, float]
    log_posteriors: Dict[str, float]
    priors: Dict[str, float]
    likelihoods: Dict[str, float]
    marginal: float
    evidence: List[EvidenceItem]
    trace: List[TraceEntry] = Field(default_factory=list)
    activated_rules: List[str] = Field(default_factory=list)

    @validator('log_posteriors')
    def validate_log_posteriors(cls, v):
        for label, value in v.items():
            if not math.isfinite(value):
                raise ValueError(f"log posterior of {label} must be finite, got {value}")
        return v

    @validator('posteriors')
    def validate_posteriors(cls, v):
        for label, value in v.items():
            if value is not None and (not math.isfinite(value) or value < 0):
                raise ValueError(f"posterior of {label} must be finite and >= 0, got {value}")
        return v

    def trace_for(self, factor: TraceFactor, label: Optional[str] = None) -> List[TraceEntry]:
        return [e for e in self.trace if e.factor == factor and (label is None or e.label == label)]
