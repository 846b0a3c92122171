"""LLM clients: an OpenAI-compatible HTTP client and an offline mock.

The mock resolves each prompt to a fixture file named by the prompt's
SHA-256 hex digest, so pipeline runs are fully deterministic and offline.
"""

from __future__ import annotations

import hashlib
import logging
import os
import time
from pathlib import Path
from typing import Protocol

import requests

logger = logging.getLogger(__name__)

BASE_URL_ENV = "CHARTKIT_LLM_BASE_URL"
API_KEY_ENV = "CHARTKIT_LLM_API_KEY"


class LlmError(RuntimeError):
    """Transport or HTTP failure after retries are exhausted."""


class LlmClient(Protocol):
    def complete(self, prompt: str) -> str: ...


def prompt_key(prompt: str) -> str:
    """Fixture filename stem for a prompt."""
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class MockLlmClient:
    """Serves completions from a directory of <sha256(prompt)>.txt files."""

    def __init__(self, fixture_dir: str | Path):
        self.fixture_dir = Path(fixture_dir)
        if not self.fixture_dir.is_dir():
            raise LlmError(f"mock fixture directory not found: {self.fixture_dir}")

    def complete(self, prompt: str) -> str:
        path = self.fixture_dir / f"{prompt_key(prompt)}.txt"
        if not path.is_file():
            raise LlmError(f"no mock completion for prompt hash {prompt_key(prompt)}")
        return path.read_text(encoding="utf-8")

    @staticmethod
    def record(fixture_dir: str | Path, prompt: str, completion: str) -> Path:
        """Write a fixture file for a prompt; used to build test corpora."""
        path = Path(fixture_dir) / f"{prompt_key(prompt)}.txt"
        path.write_text(completion, encoding="utf-8")
        return path


class HttpLlmClient:
    """Chat-completions client with bounded retries and exponential backoff."""

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        model: str = "default",
        max_retries: int = 3,
        backoff_s: float = 1.0,
        timeout_s: float = 60.0,
        session: requests.Session | None = None,
    ):
        self.base_url = (base_url or os.environ.get(BASE_URL_ENV, "")).rstrip("/")
        if not self.base_url:
            raise LlmError(f"no LLM base URL configured (set {BASE_URL_ENV})")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.model = model
        self.max_retries = max_retries
        self.backoff_s = backoff_s
        self.timeout_s = timeout_s
        self.session = session or requests.Session()

    def complete(self, prompt: str) -> str:
        url = f"{self.base_url}/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
        }
        last_error: Exception | None = None
        for attempt in range(self.max_retries):
            try:
                resp = self.session.post(
                    url, json=payload, headers=headers, timeout=self.timeout_s
                )
                if resp.status_code >= 500:
                    raise requests.HTTPError(f"server error {resp.status_code}")
                resp.raise_for_status()
                body = resp.json()
                return body["choices"][0]["message"]["content"]
            except (requests.RequestException, KeyError, ValueError) as exc:
                last_error = exc
                if attempt < self.max_retries - 1:
                    delay = self.backoff_s * (2**attempt)
                    logger.warning("LLM request failed (%s), retrying in %.1fs", exc, delay)
                    time.sleep(delay)
        raise LlmError(f"LLM request failed after {self.max_retries} attempts: {last_error}")
