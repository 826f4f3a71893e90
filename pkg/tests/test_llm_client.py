import json
from pathlib import Path

import pytest

from conftest import http_stub
from tifre.errors import LLMError
from tifre.llm_client import BACKOFF_BASE_SEC, ChatClient, TranscriptClient
from tifre.prompting import LlmConfig, RewriteRequest

GOLDEN = Path(__file__).parent / "golden"

REQ = RewriteRequest(text="describe", model_name="stub-chat", temperature=0.0, max_tokens=64)


def _response(content: str) -> dict:
    return {"choices": [{"message": {"role": "assistant", "content": content}}]}


def test_complete_posts_expected_body(monkeypatch):
    monkeypatch.setenv("TIFRE_LLM_API_KEY", "sk-test-not-a-real-key")
    seen = {}

    def handler(path, payload):
        seen["path"] = path
        seen["payload"] = payload
        return 200, _response("a photo of a cat")

    with http_stub(handler) as base:
        cfg = LlmConfig(endpoint=f"{base}/v1/chat/completions", model="stub-chat")
        out = ChatClient(cfg).complete(REQ)
    assert out == "a photo of a cat"
    assert seen["path"] == "/v1/chat/completions"
    assert seen["payload"] == {
        "model": "stub-chat",
        "messages": [{"role": "user", "content": "describe"}],
        "temperature": 0.0,
        "max_tokens": 64,
    }


def test_retries_then_succeeds_with_backoff():
    calls = {"n": 0}

    def handler(path, payload):
        calls["n"] += 1
        if calls["n"] < 3:
            return 500, {"error": "overloaded"}
        return 200, _response("a photo of a dog")

    sleeps = []
    with http_stub(handler) as base:
        cfg = LlmConfig(endpoint=f"{base}/chat", model="m", retries=2)
        client = ChatClient(cfg, sleep=sleeps.append)
        assert client.complete(REQ) == "a photo of a dog"
    assert calls["n"] == 3
    assert sleeps == [BACKOFF_BASE_SEC, BACKOFF_BASE_SEC * 2]


def test_exhausted_retries_raise_llm_error():
    def handler(path, payload):
        return 503, {"error": "down"}

    with http_stub(handler) as base:
        cfg = LlmConfig(endpoint=f"{base}/chat", model="m", retries=1)
        client = ChatClient(cfg, sleep=lambda s: None)
        with pytest.raises(LLMError):
            client.complete(REQ)


def test_malformed_response_raises_llm_error():
    with http_stub(lambda p, b: (200, {"unexpected": True})) as base:
        cfg = LlmConfig(endpoint=f"{base}/chat", model="m", retries=0)
        with pytest.raises(LLMError):
            ChatClient(cfg).complete(REQ)


def test_missing_endpoint_or_model_rejected():
    with pytest.raises(LLMError):
        ChatClient(LlmConfig(endpoint="", model="m"))
    with pytest.raises(LLMError):
        ChatClient(LlmConfig(endpoint="http://x", model=""))


def test_api_key_header_sent_only_when_set(monkeypatch):
    headers = {}

    def handler(path, payload):
        return 200, _response("a photo of a cat")

    class SpyClient(ChatClient):
        def _headers(self):
            h = super()._headers()
            headers.update(h)
            return h

    monkeypatch.delenv("TIFRE_LLM_API_KEY", raising=False)
    monkeypatch.delenv("OPENAI_API_KEY", raising=False)
    with http_stub(handler) as base:
        SpyClient(LlmConfig(endpoint=f"{base}/c", model="m")).complete(REQ)
    assert "Authorization" not in headers

    headers.clear()
    monkeypatch.setenv("TIFRE_LLM_API_KEY", "sk-test-not-a-real-key")
    with http_stub(handler) as base:
        SpyClient(LlmConfig(endpoint=f"{base}/c", model="m")).complete(REQ)
    assert headers["Authorization"] == "Bearer sk-test-not-a-real-key"


def test_transcript_replays_full_chat_response():
    client = TranscriptClient(GOLDEN / "llm_transcript.json")
    out = client.complete(REQ)
    assert out == "a photo of a red apple. a photo of a yellow banana."


def test_transcript_accepts_bare_content_shapes(tmp_path):
    p1 = tmp_path / "t1.json"
    p1.write_text(json.dumps({"content": "a photo of a fox"}))
    assert TranscriptClient(p1).complete(REQ) == "a photo of a fox"

    p2 = tmp_path / "t2.json"
    p2.write_text(json.dumps("a photo of a bear"))
    assert TranscriptClient(p2).complete(REQ) == "a photo of a bear"

    p3 = tmp_path / "t3.txt"
    p3.write_text("a photo of a wolf\n")
    assert TranscriptClient(p3).complete(REQ) == "a photo of a wolf\n"


def test_transcript_missing_file():
    with pytest.raises(LLMError):
        TranscriptClient("/nonexistent/transcript.json").complete(REQ)
