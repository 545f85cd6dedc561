from typing import Dict, List

from pydantic import BaseModel, Field, validator


class Chunk(BaseModel):
    id: str
    text: str
    token_count: int = Field(..., ge=1)
    source: str = "corpus"

    @validator('text')
    def validate_text(cls, v):
        if not v.strip():
            raise ValueError('chunk text must be non-empty')
        return v


class RetrievedChunk(BaseModel):
    chunk: Chunk
    similarity: float


class PromptBundle(BaseModel):
    system_prompt: str
    chunks: List[RetrievedChunk]
    query: str

    @property
    def chunk_ids(self) -> List[str]:
        return [c.chunk.id for c in self.chunks]

    def user_message(self) -> str:
        context = "\n\n".join(f"[{c.chunk.id}]\n{c.chunk.text.strip()}" for c in self.chunks)
        return f"Context:\n{context}\n\nQuestion:\n{self.query}"


class PhraseTable(BaseModel):
    subjects: Dict[str, str]
    labels: Dict[str, str]
    instances: Dict[str, str]
    rules: str = "Activated rules: {rules}."

    @validator('rules')
    def validate_rules(cls, v):
        if "{rules}" not in v:
            raise ValueError('rules template must contain {rules}')
        return v
