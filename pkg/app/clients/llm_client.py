import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Protocol, Sequence

import httpx

from app.core.config import settings
from app.core.errors import BackendError, ConfigError
from app.schemas.explain import PromptBundle

logger = logging.getLogger(__name__)


class CompletionBackend(Protocol):
    def complete(self, bundle: PromptBundle) -> str:
        ...


class StubBackend:
    """Offline backend: a canonical rendering of the prompt bundle"""

    def complete(self, bundle: PromptBundle) -> str:
        lines = [f"query: {bundle.query}", f"chunks: {', '.join(bundle.chunk_ids)}"]
        for retrieved in bundle.chunks:
            lines.append(f"[{retrieved.chunk.id}] {retrieved.chunk.text.strip()}")
        return "\n".join(lines)


class HttpChatBackend:
    """Chat-completions client: system + user message, bearer token read from the environment"""

    def __init__(
        self,
        endpoint: str = settings.LLM_ENDPOINT,
        model: str = settings.LLM_MODEL,
        api_key_env: str = settings.LLM_API_KEY_ENV,
        timeout: float = settings.LLM_TIMEOUT_SECONDS,
        max_attempts: int = settings.LLM_MAX_ATTEMPTS,
        backoff: float = settings.LLM_BACKOFF_SECONDS,
        client: Optional[httpx.Client] = None,
    ):
        if max_attempts < 1:
            raise ConfigError("max_attempts must be >= 1")
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.max_attempts = max_attempts
        self.backoff = backoff
        self._client = client or httpx.Client(timeout=timeout)

    def _headers(self) -> dict:
        token = os.environ.get(self.api_key_env)
        if not token:
            raise ConfigError(f"environment variable {self.api_key_env} is not set")
        return {"Authorization": f"Bearer {token}", "Content-Type": "application/json"}

    def _payload(self, bundle: PromptBundle) -> dict:
        return {
            "model": self.model,
            "messages": [
                {"role": "system", "content": bundle.system_prompt},
                {"role": "user", "content": bundle.user_message()},
            ],
        }

    def complete(self, bundle: PromptBundle) -> str:
        headers = self._headers()
        payload = self._payload(bundle)
        last_error: Optional[Exception] = None

        for attempt in range(self.max_attempts):
            try:
                response = self._client.post(self.endpoint, json=payload, headers=headers)
                response.raise_for_status()
                content = response.json()["choices"][0]["message"]["content"]
                if not isinstance(content, str):
                    raise ValueError("completion content is not text")
                return content
            except (httpx.HTTPError, KeyError, IndexError, ValueError) as e:
                last_error = e
                if attempt < self.max_attempts - 1:
                    delay = self.backoff * (2 ** attempt)
                    logger.warning(f"LLM attempt {attempt + 1} failed, retrying in {delay:.2f}s: {str(e)[:100]}")
                    time.sleep(delay)

        logger.error(f"🔥 LLM backend failed after {self.max_attempts} attempts: {last_error}")
        raise BackendError(f"LLM backend failed after {self.max_attempts} attempts: {last_error}")


def generate(bundle: PromptBundle, backend: CompletionBackend) -> str:
    return backend.complete(bundle)


def generate_many(
    bundles: Sequence[PromptBundle],
    backend: CompletionBackend,
    max_in_flight: int = settings.RAG_MAX_IN_FLIGHT,
) -> List[str]:
    """Completions in input order with at most max_in_flight concurrent backend calls"""
    if max_in_flight < 1:
        raise ConfigError("max_in_flight must be >= 1")
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        return list(pool.map(backend.complete, bundles))
