"""Minimal chat-completion client plus a transcript-replay double.

Speaks the common OpenAI-style wire shape:

    POST <endpoint>
    {"model": ..., "messages": [{"role": "user", "content": ...}],
     "temperature": ..., "max_tokens": ...}

and reads choices[0].message.content from the reply. Requests are
idempotent (a pure rewrite of the question), so retrying is safe.
"""

from __future__ import annotations

import json
import os
import time
from pathlib import Path
from typing import Callable

import requests

from .errors import LLMError
from .prompting import LlmConfig, RewriteRequest

BACKOFF_BASE_SEC = 0.5


class ChatClient:
    """One chat-completion endpoint with per-call timeout and bounded retries."""

    def __init__(
        self,
        cfg: LlmConfig,
        session: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if not cfg.endpoint:
            raise LLMError("no chat endpoint configured")
        if not cfg.model:
            raise LLMError("no model name configured")
        self.cfg = cfg
        self._session = session or requests.Session()
        self._sleep = sleep

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.cfg.api_key_env) or os.environ.get("OPENAI_API_KEY")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, request: RewriteRequest) -> str:
        """Send one rewrite request; return the raw message content."""
        body = {
            "model": request.model_name,
            "messages": [{"role": "user", "content": request.text}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        attempts = self.cfg.retries + 1
        last_err: Exception | None = None
        for attempt in range(attempts):
            if attempt > 0:
                self._sleep(BACKOFF_BASE_SEC * (2 ** (attempt - 1)))
            try:
                resp = self._session.post(
                    self.cfg.endpoint,
                    json=body,
                    headers=self._headers(),
                    timeout=self.cfg.timeout,
                )
                resp.raise_for_status()
                return _extract_content(resp.json())
            except (requests.RequestException, LLMError, ValueError) as exc:
                last_err = exc
        raise LLMError(f"chat endpoint failed after {attempts} attempts: {last_err}")


def _extract_content(payload: dict) -> str:
    try:
        content = payload["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise LLMError(f"malformed chat response: {exc}") from exc
    if not isinstance(content, str):
        raise LLMError("chat response content is not a string")
    return content


class TranscriptClient:
    """Replays a recorded response; offline stand-in for ChatClient.

    The transcript file may be a full chat-completion response JSON, a
    JSON object {"content": "..."}, or plain text used verbatim.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def complete(self, request: RewriteRequest) -> str:
        return load_transcript(self.path)


def load_transcript(path: Path) -> str:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise LLMError(f"cannot read transcript {path}: {exc}") from exc
    try:
        payload = json.loads(raw)
    except json.JSONDecodeError:
        return raw
    if isinstance(payload, dict):
        if "choices" in payload:
            return _extract_content(payload)
        if isinstance(payload.get("content"), str):
            return payload["content"]
    if isinstance(payload, str):
        return payload
    raise LLMError(f"unrecognized transcript shape in {path}")
