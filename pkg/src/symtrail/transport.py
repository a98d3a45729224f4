"""Chat-completion transport against any OpenAI-compatible endpoint.

One request, one response, temperature pinned to zero for
reproducibility.  Transient failures retry with exponential backoff;
after the last attempt the campaign falls back to the baseline solver
for that constraint, so transport trouble never kills a run.
"""
from __future__ import annotations

import os
import time
from typing import Callable

import requests

from .errors import TransportError, TransportTimeout
from .llm import LlmRequest, LlmResponse

DEFAULT_BASE_URL = "https://api.openai.com/v1"
API_KEY_ENV = "SYMTRAIL_API_KEY"


def resolve_api_key(configured: str = "") -> str:
    """Configured key unless it is empty or the config-file placeholder."""
    if configured and configured.lower() != "xxx":
        return configured
    return os.getenv(API_KEY_ENV, "") or os.getenv("OPENAI_API_KEY", "")


class HttpTransport:
    """Blocking chat-completion client with retries."""

    def __init__(
        self,
        base_url: str = DEFAULT_BASE_URL,
        api_key: str = "",
        timeout: float = 60.0,
        retries: int = 3,
        sleeper: Callable[[float], None] = time.sleep,
        session: requests.Session | None = None,
    ):
        self.base_url = (base_url or DEFAULT_BASE_URL).rstrip("/")
        self.api_key = resolve_api_key(api_key)
        self.timeout = timeout
        self.retries = retries
        self._sleep = sleeper
        self._session = session or requests.Session()

    def complete(self, request: LlmRequest) -> LlmResponse:
        payload = {
            "model": request.model,
            "temperature": request.temperature,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        url = f"{self.base_url}/chat/completions"
        last_error: TransportError | None = None
        for attempt in range(self.retries):
            try:
                resp = self._session.post(
                    url, json=payload, headers=headers, timeout=self.timeout
                )
            except requests.Timeout as exc:
                last_error = TransportTimeout(f"timed out after {self.timeout}s: {exc}")
            except requests.RequestException as exc:
                last_error = TransportError(str(exc))
            else:
                if resp.status_code == 200:
                    try:
                        text = resp.json()["choices"][0]["message"]["content"]
                    except (KeyError, IndexError, ValueError) as exc:
                        raise TransportError(f"malformed completion payload: {exc}")
                    return LlmResponse(text=text or "")
                last_error = TransportError(
                    f"endpoint returned {resp.status_code}", code=resp.status_code
                )
                if 400 <= resp.status_code < 500 and resp.status_code != 429:
                    break
            if attempt + 1 < self.retries:
                self._sleep(2.0**attempt)
        raise last_error if last_error else TransportError("no attempts made")
