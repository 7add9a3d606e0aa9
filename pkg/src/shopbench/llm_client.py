"""Completion clients: a chat-completions HTTP client with retries, plus
scripted clients for offline and test runs."""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from typing import Protocol

import requests

DEFAULT_API_KEY_ENV = "SHOPBENCH_API_KEY"


class EndpointError(RuntimeError):
    """The endpoint could not produce a completion within the retry budget."""


class EmptyCompletionError(EndpointError):
    """The endpoint answered with an empty completion."""


class ChatClient(Protocol):
    def complete(self, prompt: str) -> str: ...


@dataclass
class HttpChatClient:
    """Chat-completions-style HTTP client.

    ``endpoint`` is the full URL of the completions route. The credential is
    read from the environment (never passed as a flag) and sent as a bearer
    token. Transient failures (connection errors, 408/429/5xx) retry with
    exponential backoff.
    """

    endpoint: str
    model: str
    api_key_env: str = DEFAULT_API_KEY_ENV
    temperature: float = 0.0
    max_tokens: int = 200
    max_retries: int = 3
    backoff_base: float = 1.0
    timeout: float = 60.0
    _session: requests.Session = field(default_factory=requests.Session, repr=False)

    def complete(self, prompt: str) -> str:
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }
        last_error: Exception | None = None
        for attempt in range(self.max_retries):
            if attempt:
                time.sleep(self.backoff_base * 2 ** (attempt - 1))
            try:
                response = self._session.post(
                    self.endpoint, json=payload, headers=headers, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if response.status_code in (408, 429) or response.status_code >= 500:
                last_error = EndpointError(f"HTTP {response.status_code} from {self.endpoint}")
                continue
            if response.status_code != 200:
                raise EndpointError(f"HTTP {response.status_code} from {self.endpoint}: {response.text[:200]}")
            try:
                data = response.json()
                content = data["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise EndpointError(f"malformed completion payload: {exc}") from exc
            if not isinstance(content, str) or not content.strip():
                raise EmptyCompletionError(f"empty completion from {self.model}")
            return content
        raise EndpointError(
            f"no completion after {self.max_retries} attempts: {last_error}"
        ) from last_error


class ScriptedClient:
    """Replays a fixed list of completions; handy in tests."""

    def __init__(self, responses: list[str]):
        self._responses = list(responses)
        self.calls = 0

    def complete(self, prompt: str) -> str:
        if not self._responses:
            raise EndpointError("scripted client ran out of responses")
        self.calls += 1
        return self._responses.pop(0)


class FixedClient:
    """Always answers with the same completion."""

    def __init__(self, response: str):
        self.response = response
        self.calls = 0

    def complete(self, prompt: str) -> str:
        self.calls += 1
        return self.response
