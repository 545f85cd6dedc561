import json
import threading
import time

import httpx
import numpy as np
import pytest

from app.clients.embedding_client import RemoteEmbedder
from app.clients.llm_client import HttpChatBackend, StubBackend, generate, generate_many
from app.core.errors import BackendError, ConfigError
from app.schemas.explain import Chunk, PromptBundle, RetrievedChunk

ENDPOINT = "https://llm.test/v1/chat/completions"


def bundle(query="why LLC?"):
    chunk = Chunk(id="chunk-00000-abcd1234", text="Vehicle 741 is moving left. ", token_count=5)
    return PromptBundle(system_prompt="You explain predictions.", chunks=[RetrievedChunk(chunk=chunk, similarity=0.9)], query=query)


def completion(content):
    return httpx.Response(200, json={"choices": [{"message": {"content": content}}]})


@pytest.fixture
def api_key(monkeypatch):
    monkeypatch.setenv("ROADKG_TEST_KEY", "secret")
    return "ROADKG_TEST_KEY"


class TestHttpChatBackend:

    def test_success(self, api_key):
        seen = []

        def handler(request):
            seen.append(request)
            return completion("Because it is moving left.")

        client = httpx.Client(transport=httpx.MockTransport(handler))
        backend = HttpChatBackend(endpoint=ENDPOINT, model="m", api_key_env=api_key, client=client)
        assert generate(bundle(), backend) == "Because it is moving left."

        request = seen[0]
        assert request.headers["Authorization"] == "Bearer secret"
        payload = json.loads(request.content)
        assert payload["model"] == "m"
        assert payload["messages"][0] == {"role": "system", "content": "You explain predictions."}
        assert "[chunk-00000-abcd1234]" in payload["messages"][1]["content"]
        assert payload["messages"][1]["content"].endswith("Question:\nwhy LLC?")

    def test_retries_then_succeeds(self, api_key):
        calls = []

        def handler(request):
            calls.append(request)
            if len(calls) < 3:
                return httpx.Response(503)
            return completion("ok")

        client = httpx.Client(transport=httpx.MockTransport(handler))
        backend = HttpChatBackend(endpoint=ENDPOINT, api_key_env=api_key, max_attempts=3, backoff=0.0, client=client)
        assert backend.complete(bundle()) == "ok"
        assert len(calls) == 3

    def test_gives_up_after_max_attempts(self, api_key):
        calls = []

        def handler(request):
            calls.append(request)
            return httpx.Response(500)

        client = httpx.Client(transport=httpx.MockTransport(handler))
        backend = HttpChatBackend(endpoint=ENDPOINT, api_key_env=api_key, max_attempts=3, backoff=0.0, client=client)
        with pytest.raises(BackendError, match="after 3 attempts"):
            backend.complete(bundle())
        assert len(calls) == 3

    def test_malformed_response(self, api_key):
        client = httpx.Client(transport=httpx.MockTransport(lambda request: httpx.Response(200, json={"choices": []})))
        backend = HttpChatBackend(endpoint=ENDPOINT, api_key_env=api_key, max_attempts=1, client=client)
        with pytest.raises(BackendError):
            backend.complete(bundle())

    def test_missing_token(self, monkeypatch):
        monkeypatch.delenv("ROADKG_MISSING_KEY", raising=False)
        backend = HttpChatBackend(endpoint=ENDPOINT, api_key_env="ROADKG_MISSING_KEY")
        with pytest.raises(ConfigError, match="ROADKG_MISSING_KEY"):
            backend.complete(bundle())


class TestGenerateMany:

    def test_preserves_input_order(self):
        class SlowFirstBackend:
            def complete(self, b):
                if b.query == "q0":
                    time.sleep(0.05)
                return b.query.upper()

        bundles = [bundle(f"q{i}") for i in range(8)]
        assert generate_many(bundles, SlowFirstBackend(), max_in_flight=4) == [f"Q{i}" for i in range(8)]

    def test_bounded_concurrency(self):
        lock = threading.Lock()
        state = {"active": 0, "peak": 0}

        class CountingBackend:
            def complete(self, b):
                with lock:
                    state["active"] += 1
                    state["peak"] = max(state["peak"], state["active"])
                time.sleep(0.01)
                with lock:
                    state["active"] -= 1
                return b.query

        generate_many([bundle(f"q{i}") for i in range(12)], CountingBackend(), max_in_flight=2)
        assert state["peak"] <= 2

    def test_invalid_bound(self):
        with pytest.raises(ConfigError):
            generate_many([bundle()], StubBackend(), max_in_flight=0)


class TestStubBackend:

    def test_canonical_rendering(self):
        assert StubBackend().complete(bundle()) == (
            "query: why LLC?\n"
            "chunks: chunk-00000-abcd1234\n"
            "[chunk-00000-abcd1234] Vehicle 741 is moving left."
        )


class TestRemoteEmbedder:

    def test_embed(self):
        def handler(request):
            texts = json.loads(request.content)["input"]
            return httpx.Response(200, json={"data": [{"embedding": [float(len(t)), 1.0]} for t in texts]})

        embedder = RemoteEmbedder(2, endpoint="https://embed.test", client=httpx.Client(transport=httpx.MockTransport(handler)))
        assert np.array_equal(embedder.embed(["ab", "abc"]), [[2.0, 1.0], [3.0, 1.0]])

    def test_wrong_dimension(self):
        handler = lambda request: httpx.Response(200, json={"data": [{"embedding": [1.0, 2.0, 3.0]}]})  # noqa: E731
        embedder = RemoteEmbedder(2, endpoint="https://embed.test", client=httpx.Client(transport=httpx.MockTransport(handler)))
        with pytest.raises(BackendError):
            embedder.embed(["x"])

    def test_needs_endpoint(self):
        with pytest.raises(ConfigError):
            RemoteEmbedder(2, endpoint=None)
