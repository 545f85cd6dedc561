import hashlib
import logging
import re
from typing import List, Protocol, Sequence

import numpy as np

from app.core.config import settings
from app.core.errors import ConfigError
from app.schemas.explain import Chunk, PromptBundle, RetrievedChunk

logger = logging.getLogger(__name__)

# a token is a whitespace-delimited word together with the whitespace that follows it;
# leading whitespace of the document sticks to the first token
TOKEN_PATTERN = re.compile(r"(?:\A\s+)?\S+\s*")
WORD_PATTERN = re.compile(r"\w+")


class Embedder(Protocol):
    dim: int

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        ...


class HashingEmbedder:
    """Deterministic bag-of-words embedder: blake2b-hashed lower-case words into signed buckets"""

    def __init__(self, dim: int = settings.RAG_EMBEDDING_DIM):
        if dim < 1:
            raise ConfigError("embedding dimension must be >= 1")
        self.dim = dim

    def _bucket(self, token: str):
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        value = int.from_bytes(digest, "little")
        return value % self.dim, 1.0 if (value >> 63) & 1 else -1.0

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for row, text in enumerate(texts):
            tokens = WORD_PATTERN.findall(text.lower()) or [text]
            for token in tokens:
                index, sign = self._bucket(token)
                out[row, index] += sign
        return out


def _normalize(vectors: np.ndarray) -> np.ndarray:
    vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    if (norms == 0).any():
        raise ConfigError("cannot normalize a zero embedding vector")
    return vectors / norms


class VectorStore:
    """In-memory exact cosine search over unit-normalized chunk vectors"""

    def __init__(self, chunks: Sequence[Chunk], vectors: np.ndarray):
        if not chunks:
            raise ConfigError("vector store needs at least one chunk")
        vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
        if len(chunks) != vectors.shape[0]:
            raise ConfigError(f"{len(chunks)} chunks but {vectors.shape[0]} vectors")
        self.chunks: List[Chunk] = list(chunks)
        self.ids: List[str] = [c.id for c in self.chunks]
        if len(set(self.ids)) != len(self.ids):
            raise ConfigError("duplicate chunk ids in vector store")
        self.vectors = _normalize(vectors)
        self.vectors.setflags(write=False)
        self.dim = self.vectors.shape[1]

    @classmethod
    def build(cls, chunks: Sequence[Chunk], embedder: Embedder) -> "VectorStore":
        store = cls(chunks, embedder.embed([c.text for c in chunks]))
        logger.info(f"Built vector store with {len(store)} chunks (dim {store.dim})")
        return store

    def __len__(self) -> int:
        return len(self.chunks)

    def get(self, chunk_id: str) -> Chunk:
        return self.chunks[self.ids.index(chunk_id)]


class RetrievalService:

    @staticmethod
    def chunk_corpus(doc: str, size: int = settings.RAG_CHUNK_SIZE, source: str = "corpus") -> List[Chunk]:
        """Split a document into runs of at most `size` whitespace tokens; chunk texts concatenate back to doc"""
        if size < 1:
            raise ConfigError("chunk size must be >= 1")
        tokens = TOKEN_PATTERN.findall(doc)
        if not tokens:
            raise ConfigError("cannot chunk an empty document")

        chunks = []
        for i, start in enumerate(range(0, len(tokens), size)):
            piece = tokens[start:start + size]
            text = "".join(piece)
            digest = hashlib.sha1(text.encode("utf-8")).hexdigest()[:8]
            chunks.append(Chunk(id=f"chunk-{i:05d}-{digest}", text=text, token_count=len(piece), source=source))
        return chunks

    @staticmethod
    def retrieve(store: VectorStore, query_vector: np.ndarray, k: int = settings.RAG_TOP_K) -> List[RetrievedChunk]:
        """Top-k chunks by cosine similarity, descending; equal similarities ordered by chunk id"""
        if k < 1:
            raise ConfigError("k must be >= 1")
        query = np.asarray(query_vector, dtype=np.float64).reshape(-1)
        if query.shape[0] != store.dim:
            raise ConfigError(f"query dimension {query.shape[0]} does not match store dimension {store.dim}")
        query = _normalize(query)[0]
        similarities = np.clip(store.vectors @ query, -1.0, 1.0)
        order = np.lexsort((np.asarray(store.ids), -similarities))[:k]
        return [RetrievedChunk(chunk=store.chunks[i], similarity=float(similarities[i])) for i in order]

    @staticmethod
    def build_prompt(
        store: VectorStore,
        embedder: Embedder,
        query: str,
        system_prompt: str,
        k: int = settings.RAG_TOP_K,
    ) -> PromptBundle:
        retrieved = RetrievalService.retrieve(store, embedder.embed([query])[0], k)
        return PromptBundle(system_prompt=system_prompt, chunks=retrieved, query=query)


chunk_corpus = RetrievalService.chunk_corpus
retrieve = RetrievalService.retrieve
