"""Chat-completion transport for descriptor generation."""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Protocol

import requests

from .errors import MissingApiKeyError, TransportError


@dataclass
class LlmConfig:
    """Connection and sampling settings for the chat-completion endpoint."""

    endpoint_url: str = "https://api.openai.com/v1/chat/completions"
    model_id: str = "gpt-3.5-turbo"
    temperature: float = 0.0
    max_retries: int = 3
    timeout_s: float = 30.0
    api_key_env_var: str = "OPENAI_API_KEY"

    def __post_init__(self):
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


class ChatTransport(Protocol):
    """Anything that can answer one (system, user) chat exchange with text."""

    def complete(self, system: str, user: str) -> str: ...


class HttpChatTransport:
    """OpenAI-compatible chat-completion HTTP client.

    The API key is read from the environment variable named in the config;
    it is never stored in configuration files.
    """

    def __init__(self, cfg: LlmConfig, session: requests.Session | None = None):
        self.cfg = cfg
        self._session = session or requests.Session()

    def complete(self, system: str, user: str) -> str:
        key = os.environ.get(self.cfg.api_key_env_var, "")
        if not key:
            raise MissingApiKeyError(
                f"environment variable {self.cfg.api_key_env_var} is not set"
            )
        payload = {
            "model": self.cfg.model_id,
            "temperature": self.cfg.temperature,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        }
        try:
            resp = self._session.post(
                self.cfg.endpoint_url,
                json=payload,
                headers={"Authorization": f"Bearer {key}"},
                timeout=self.cfg.timeout_s,
            )
        except requests.RequestException as exc:
            raise TransportError(f"request to {self.cfg.endpoint_url} failed: {exc}") from exc
        if resp.status_code != 200:
            raise TransportError(
                f"endpoint returned HTTP {resp.status_code}", raw=resp.text
            )
        try:
            body = resp.json()
            content = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(
                f"malformed completion response: {exc}", raw=resp.text
            ) from exc
        if not isinstance(content, str):
            raise TransportError("completion content is not text", raw=resp.text)
        return content
