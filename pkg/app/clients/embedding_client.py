import logging
from typing import Optional, Sequence

import httpx
import numpy as np

from app.core.config import settings
from app.core.errors import BackendError, ConfigError

logger = logging.getLogger(__name__)


class RemoteEmbedder:
    """Embedding service client speaking the {model, input} -> {data: [{embedding}]} contract"""

    def __init__(
        self,
        dim: int,
        endpoint: Optional[str] = settings.EMBEDDING_ENDPOINT,
        model: str = settings.EMBEDDING_MODEL,
        timeout: float = settings.LLM_TIMEOUT_SECONDS,
        client: Optional[httpx.Client] = None,
    ):
        if not endpoint:
            raise ConfigError("EMBEDDING_ENDPOINT is not configured")
        self.dim = dim
        self.endpoint = endpoint
        self.model = model
        self._client = client or httpx.Client(timeout=timeout)

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        try:
            response = self._client.post(self.endpoint, json={"model": self.model, "input": list(texts)})
            response.raise_for_status()
            vectors = np.asarray([item["embedding"] for item in response.json()["data"]], dtype=np.float64)
        except (httpx.HTTPError, KeyError, TypeError, ValueError) as e:
            raise BackendError(f"embedding backend failed: {e}")
        if vectors.shape != (len(texts), self.dim):
            raise BackendError(f"embedding backend returned shape {vectors.shape}, expected {(len(texts), self.dim)}")
        logger.debug(f"Embedded {len(texts)} texts via {self.endpoint}")
        return vectors
