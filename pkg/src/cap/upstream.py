"""Upstream clients: chat completions, embeddings, and the offline echo generator.

Both remote routes follow the de-facto open API schema ({model, messages} /
{model, input}) so any compatible server works. Each call gets one retry with
backoff; pre-processing must never take the main task down with it.
"""

from __future__ import annotations

import os
import time
from typing import Optional

import httpx

from .embedding import EmbeddingVector, ProviderUnavailable

ENV_BASE_URL = "UPSTREAM_BASE_URL"
ENV_API_KEY = "UPSTREAM_API_KEY"
ENV_CHAT_MODEL = "CHAT_MODEL"
ENV_EMBED_MODEL = "EMBED_MODEL"
ENV_EXPANDER_MODEL = "EXPANDER_MODEL"
ENV_OFFLINE = "CAP_OFFLINE"

_TRUTHY = {"1", "true", "yes", "on"}


class UpstreamFailure(RuntimeError):
    """Generation upstream failed after retry."""


def offline_from_env() -> bool:
    return os.environ.get(ENV_OFFLINE, "").strip().lower() in _TRUTHY


class UpstreamClient:
    """Shared HTTP plumbing: auth header, one retry with backoff."""

    def __init__(
        self,
        base_url: str,
        api_key: str = "",
        timeout: float = 30.0,
        retry_wait: float = 0.5,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.timeout = timeout
        self.retry_wait = retry_wait

    @classmethod
    def from_env(cls) -> "UpstreamClient":
        base = os.environ.get(ENV_BASE_URL, "")
        if not base:
            raise ValueError(f"{ENV_BASE_URL} is not set (or run offline: {ENV_OFFLINE}=1)")
        return cls(base_url=base, api_key=os.environ.get(ENV_API_KEY, ""))

    def _post(self, route: str, payload: dict) -> dict:
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception = RuntimeError("unreachable")
        for attempt in range(2):
            try:
                response = httpx.post(
                    f"{self.base_url}{route}",
                    json=payload,
                    headers=headers,
                    timeout=self.timeout,
                )
                response.raise_for_status()
                return response.json()
            except Exception as exc:  # noqa: BLE001 - network/protocol errors alike
                last_error = exc
                if attempt == 0:
                    time.sleep(self.retry_wait)
        raise last_error

    def complete(self, messages: list[dict], model: str) -> str:
        """One chat-completion round trip; returns the assistant text."""
        try:
            data = self._post("/chat/completions", {"model": model, "messages": messages})
            return data["choices"][0]["message"]["content"]
        except Exception as exc:
            raise UpstreamFailure(f"chat completion failed: {exc}") from exc

    def embed_batch(self, texts: list[str], model: str) -> list[list[float]]:
        try:
            data = self._post("/embeddings", {"model": model, "input": texts})
            return [item["embedding"] for item in data["data"]]
        except Exception as exc:
            raise ProviderUnavailable(f"embeddings request failed: {exc}") from exc


class RemoteEmbedder:
    """embedding.Embedder backed by the upstream embeddings route."""

    def __init__(self, client: UpstreamClient, model: str):
        self.client = client
        self.model = model
        self.embedder_id = f"remote:{model}"

    def embed(self, text: str) -> EmbeddingVector:
        values = self.client.embed_batch([text], self.model)[0]
        return EmbeddingVector(tuple(float(v) for v in values), self.embedder_id)


class ChatGenerator:
    """Production generator: forwards the composed prompt upstream."""

    def __init__(self, client: UpstreamClient, model: str):
        self.client = client
        self.model = model
        self.calls = 0

    def generate(self, messages: list[dict]) -> str:
        self.calls += 1
        return self.client.complete(messages, self.model)


class EchoGenerator:
    """Offline generator: echoes the actionable tail of its prompt.

    Replies are the system preambles (so injected context is visible) plus the
    final user message. Keeping the echo round-local matters: replaying the
    whole transcript into every reply would smear all history rounds into one
    semantic blob and post-shift turns could never realign.
    """

    def __init__(self):
        self.calls = 0

    def generate(self, messages: list[dict]) -> str:
        self.calls += 1
        parts = [m["content"] for m in messages if m["role"] == "system"]
        if messages and messages[-1]["role"] == "user":
            parts.append(messages[-1]["content"])
        return "\n".join(parts)


class FailingGenerator:
    """Test double for upstream outages."""

    def __init__(self, message: str = "injected failure"):
        self.message = message
        self.calls = 0

    def generate(self, messages: list[dict]) -> str:
        self.calls += 1
        raise UpstreamFailure(self.message)


def env_model(var: str, default: str) -> str:
    return os.environ.get(var, "") or default


def chat_model_from_env() -> str:
    return env_model(ENV_CHAT_MODEL, "gpt-4o-mini")


def embed_model_from_env() -> str:
    return env_model(ENV_EMBED_MODEL, "text-embedding-3-small")


def expander_model_from_env() -> Optional[str]:
    # empty means: use the chat model for expansion too
    return os.environ.get(ENV_EXPANDER_MODEL, "") or None
