from typing import Dict, Optional

from pydantic import BaseModel, Field, validator


class LinguisticFrame(BaseModel):
    """One road user at one frame with every feature expressed as a linguistic category"""

    user_id: str = Field(..., min_length=1)
    frame: int = Field(..., ge=0)
    # feature relation -> linguistic instance, e.g. LATERAL_VELOCITY_IS -> movingStraight
    assignments: Dict[str, str] = Field(default_factory=dict)
    label: Optional[str] = None

    @validator('user_id')
    def validate_user_id(cls, v):
        if any(ch.isspace() for ch in v):
            raise ValueError('user_id must not contain whitespace')
        return v

    @property
    def instance_id(self) -> str:
        return f"{self.user_id}-{self.frame}"

    def without_label(self) -> "LinguisticFrame":
        return self.model_copy(update={"label": None})

    class Config:
        frozen = True
