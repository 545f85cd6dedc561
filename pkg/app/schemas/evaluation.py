from typing import Dict, List, Optional

from pydantic import BaseModel, Field, validator

from app.core.config import settings


class SplitSpec(BaseModel):
    train_fraction: float = Field(settings.SPLIT_TRAIN_FRACTION, gt=0.0, lt=1.0)
    valid_triples: int = Field(settings.SPLIT_VALID_TRIPLES, ge=1)
    seed: int = settings.DEFAULT_SEED


class ClassMetrics(BaseModel):
    precision: float = Field(..., ge=0.0, le=1.0)
    recall: float = Field(..., ge=0.0, le=1.0)
    f1: float = Field(..., ge=0.0, le=1.0)
    support: int = Field(..., ge=0)


class ClassReport(BaseModel):
    labels: List[str]
    per_class: Dict[str, ClassMetrics]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    accuracy: float
    total: int

    @validator('per_class')
    def validate_labels(cls, v, values):
        labels = values.get('labels', [])
        if set(v) != set(labels):
            raise ValueError('per-class metrics must cover exactly the report labels')
        return v

    def format_table(self, title: Optional[str] = None) -> str:
        """Tab-separated rows: one per label, then the macro average and accuracy"""
        lines = []
        if title:
            lines.append(title)
        lines.append("class\tprecision\trecall\tf1-score\tsupport")
        for label in self.labels:
            m = self.per_class[label]
            lines.append(f"{label}\t{m.precision * 100:.2f}\t{m.recall * 100:.2f}\t{m.f1 * 100:.2f}\t{m.support}")
        lines.append(
            f"macro avg\t{self.macro_precision * 100:.2f}\t{self.macro_recall * 100:.2f}\t{self.macro_f1 * 100:.2f}\t{self.total}"
        )
        lines.append(f"accuracy\t\t\t{self.accuracy * 100:.2f}\t{self.total}")
        return "\n".join(lines)


class HorizonResult(BaseModel):
    horizon: float
    train_records: int
    test_records: int
    report: ClassReport
