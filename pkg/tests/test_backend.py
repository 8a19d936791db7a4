"""Backends: request hashing, HTTP retry/backoff, scripted rules, record/replay."""

from __future__ import annotations

import json

import pytest
import requests

from metonymy.backend import (
    BackendError,
    CachingBackend,
    ChatRequest,
    ChatResponse,
    HttpBackend,
    ScriptRule,
    ScriptedBackend,
)


def make_request(**overrides) -> ChatRequest:
    defaults = dict(
        model="m",
        messages=(("user", "Is this metonymic?"),),
        temperature=0.6,
        top_p=0.9,
        max_tokens=64,
        vote_index=0,
    )
    defaults.update(overrides)
    return ChatRequest(**defaults)


class TestChatRequest:
    def test_validation(self):
        with pytest.raises(ValueError):
            make_request(model="")
        with pytest.raises(ValueError):
            make_request(messages=())
        with pytest.raises(ValueError):
            make_request(messages=(("robot", "hi"),))
        with pytest.raises(ValueError):
            make_request(messages=(("user", "hi"), ("assistant", "ok")))
        with pytest.raises(ValueError):
            make_request(temperature=2.5)
        with pytest.raises(ValueError):
            make_request(top_p=0.0)
        with pytest.raises(ValueError):
            make_request(max_tokens=0)
        with pytest.raises(ValueError):
            make_request(vote_index=-1)

    def test_cache_key_is_sha256_hex(self):
        key = make_request().cache_key()
        assert len(key) == 64
        int(key, 16)

    def test_cache_key_stable_and_sensitive(self):
        assert make_request().cache_key() == make_request().cache_key()
        assert make_request().cache_key() != make_request(vote_index=1).cache_key()
        assert make_request().cache_key() != make_request(temperature=0.4).cache_key()
        other = make_request(messages=(("user", "Different."),))
        assert make_request().cache_key() != other.cache_key()

    def test_dict_round_trip(self):
        req = make_request(messages=(("system", "be terse"), ("user", "hi")))
        assert ChatRequest.from_dict(req.to_dict()) == req

    def test_response_source_validated(self):
        with pytest.raises(ValueError):
            ChatResponse(text="x", source="psychic")


class FakeHttpResponse:
    def __init__(self, status_code: int, body=None, text: str = ""):
        self.status_code = status_code
        self._body = body
        self.text = text or (json.dumps(body) if body is not None else "")

    def json(self):
        if self._body is None:
            raise ValueError("not json")
        return self._body


def ok_body(text: str = "Final answer: METONYMIC", finish: str = "stop") -> dict:
    return {"choices": [{"message": {"content": text}, "finish_reason": finish}]}


class FakeSession:
    """Replays a queue of responses/exceptions and records each call."""

    def __init__(self, outcomes):
        self.outcomes = list(outcomes)
        self.calls: list[dict] = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.calls.append(
            {"url": url, "json": json, "headers": headers, "timeout": timeout}
        )
        outcome = self.outcomes.pop(0)
        if isinstance(outcome, Exception):
            raise outcome
        return outcome


def make_backend(session, **kw) -> tuple[HttpBackend, list[float]]:
    sleeps: list[float] = []
    backend = HttpBackend(
        "http://example.invalid/v1/chat/completions",
        session=session,
        sleep=sleeps.append,
        **kw,
    )
    return backend, sleeps


class TestHttpBackend:
    def test_success_parses_text(self):
        session = FakeSession([FakeHttpResponse(200, ok_body())])
        backend, sleeps = make_backend(session)
        resp = backend.complete(make_request())
        assert resp.text == "Final answer: METONYMIC"
        assert resp.source == "live"
        assert not resp.truncated
        assert sleeps == []

    def test_truncation_flag(self):
        session = FakeSession([FakeHttpResponse(200, ok_body(finish="length"))])
        backend, _ = make_backend(session)
        assert backend.complete(make_request()).truncated

    def test_retries_on_429_with_exponential_backoff(self):
        session = FakeSession(
            [
                FakeHttpResponse(429),
                FakeHttpResponse(503),
                FakeHttpResponse(200, ok_body()),
            ]
        )
        backend, sleeps = make_backend(session)
        resp = backend.complete(make_request())
        assert resp.text
        assert sleeps == [1.0, 2.0]
        assert len(session.calls) == 3

    def test_retries_on_connection_error(self):
        session = FakeSession(
            [requests.ConnectionError("boom"), FakeHttpResponse(200, ok_body())]
        )
        backend, sleeps = make_backend(session)
        assert backend.complete(make_request()).text
        assert sleeps == [1.0]

    def test_gives_up_after_max_attempts(self):
        session = FakeSession([FakeHttpResponse(429)] * 5)
        backend, sleeps = make_backend(session)
        with pytest.raises(BackendError, match="gave up after 5"):
            backend.complete(make_request())
        assert sleeps == [1.0, 2.0, 4.0, 8.0]

    def test_client_error_fails_fast(self):
        session = FakeSession([FakeHttpResponse(400, text="bad request")])
        backend, sleeps = make_backend(session)
        with pytest.raises(BackendError, match="HTTP 400"):
            backend.complete(make_request())
        assert sleeps == [] and len(session.calls) == 1

    def test_malformed_body_fails_fast(self):
        session = FakeSession([FakeHttpResponse(200, {"choices": []})])
        backend, _ = make_backend(session)
        with pytest.raises(BackendError, match="malformed"):
            backend.complete(make_request())

    def test_error_carries_request_key_prefix(self):
        session = FakeSession([FakeHttpResponse(400, text="no")])
        backend, _ = make_backend(session)
        key = make_request().cache_key()
        with pytest.raises(BackendError, match=rf"\[request {key[:12]}\]"):
            backend.complete(make_request())

    def test_vote_index_not_sent_over_wire(self):
        session = FakeSession([FakeHttpResponse(200, ok_body())])
        backend, _ = make_backend(session)
        backend.complete(make_request(vote_index=3))
        payload = session.calls[0]["json"]
        assert "vote_index" not in payload
        assert payload["model"] == "m"
        assert payload["messages"] == [{"role": "user", "content": "Is this metonymic?"}]

    def test_bearer_header_from_env(self, monkeypatch):
        monkeypatch.setenv("MY_KEY", "sekrit")
        session = FakeSession([FakeHttpResponse(200, ok_body())])
        backend, _ = make_backend(session, api_key_env="MY_KEY")
        backend.complete(make_request())
        assert session.calls[0]["headers"]["Authorization"] == "Bearer sekrit"

    def test_no_header_when_env_unset(self, monkeypatch):
        monkeypatch.delenv("MY_KEY", raising=False)
        session = FakeSession([FakeHttpResponse(200, ok_body())])
        backend, _ = make_backend(session, api_key_env="MY_KEY")
        backend.complete(make_request())
        assert "Authorization" not in session.calls[0]["headers"]


class TestScriptedBackend:
    def test_first_matching_rule_wins(self):
        backend = ScriptedBackend(
            [
                ScriptRule(text="first", contains="metonymic"),
                ScriptRule(text="second", contains="metonymic"),
            ]
        )
        assert backend.complete(make_request()).text == "first"

    def test_contains_and_regex_must_both_match(self):
        rule = ScriptRule(text="yes", contains="Is this", regex=r"metonymic\?")
        assert rule.matches("Is this metonymic?")
        assert not rule.matches("Is this literal?")
        assert not rule.matches("metonymic?")

    def test_match_sees_all_message_contents(self):
        backend = ScriptedBackend([ScriptRule(text="ok", contains="clarifier")])
        req = make_request(
            messages=(("user", "first"), ("assistant", "reply"), ("user", "clarifier"))
        )
        assert backend.complete(req).text == "ok"

    def test_by_vote_cycles(self):
        backend = ScriptedBackend(
            [ScriptRule(by_vote=("a", "b", "c"), contains="metonymic")]
        )
        texts = [
            backend.complete(make_request(vote_index=i)).text for i in range(5)
        ]
        assert texts == ["a", "b", "c", "a", "b"]

    def test_default_and_no_match(self):
        with_default = ScriptedBackend([], default="fallback")
        assert with_default.complete(make_request()).text == "fallback"
        without = ScriptedBackend([])
        with pytest.raises(BackendError, match="no scripted rule"):
            without.complete(make_request())

    def test_source_is_scripted(self):
        backend = ScriptedBackend([], default="x")
        assert backend.complete(make_request()).source == "scripted"

    def test_from_json(self, tmp_path):
        path = tmp_path / "script.json"
        path.write_text(
            json.dumps(
                {
                    "rules": [
                        {"contains": "alpha", "text": "A"},
                        {"regex": "bet+a", "by_vote": ["B1", "B2"]},
                    ],
                    "default": "D",
                }
            )
        )
        backend = ScriptedBackend.from_json(path)
        assert backend.complete(make_request(messages=(("user", "alpha"),))).text == "A"
        req = make_request(messages=(("user", "betta"),), vote_index=1)
        assert backend.complete(req).text == "B2"
        assert backend.complete(make_request(messages=(("user", "x"),))).text == "D"


class TestCachingBackend:
    def test_records_then_replays(self, tmp_path):
        inner = ScriptedBackend([], default="scripted says hi")
        cache = CachingBackend(tmp_path / "cache", inner=inner)
        first = cache.complete(make_request())
        assert first.source == "scripted"
        files = list((tmp_path / "cache").glob("*.json"))
        assert len(files) == 1
        assert files[0].stem == make_request().cache_key()

        second = cache.complete(make_request())
        assert second.source == "replay"
        assert second.text == "scripted says hi"
        assert second.latency == 0.0

    def test_replay_without_inner_errors_on_miss(self, tmp_path):
        cache = CachingBackend(tmp_path / "cache")
        with pytest.raises(BackendError, match="replay miss"):
            cache.complete(make_request())

    def test_replay_hit_without_inner(self, tmp_path):
        writer = CachingBackend(tmp_path / "cache", inner=ScriptedBackend([], default="x"))
        writer.complete(make_request())
        reader = CachingBackend(tmp_path / "cache")
        assert reader.complete(make_request()).text == "x"

    def test_distinct_votes_get_distinct_entries(self, tmp_path):
        inner = ScriptedBackend([ScriptRule(by_vote=("v0", "v1"), contains="")])
        cache = CachingBackend(tmp_path / "cache", inner=inner)
        assert cache.complete(make_request(vote_index=0)).text == "v0"
        assert cache.complete(make_request(vote_index=1)).text == "v1"
        assert len(list((tmp_path / "cache").glob("*.json"))) == 2
        # replays keep the per-vote texts
        assert cache.complete(make_request(vote_index=1)).text == "v1"

    def test_no_tmp_files_left_behind(self, tmp_path):
        cache = CachingBackend(tmp_path / "cache", inner=ScriptedBackend([], default="x"))
        cache.complete(make_request())
        assert list((tmp_path / "cache").glob("*.tmp")) == []

    def test_truncated_flag_round_trips(self, tmp_path):
        class Trunc(ScriptedBackend):
            def complete(self, request):
                return ChatResponse(text="cut off", truncated=True, source="scripted")

        cache = CachingBackend(tmp_path / "cache", inner=Trunc([]))
        assert cache.complete(make_request()).truncated
        replay = CachingBackend(tmp_path / "cache").complete(make_request())
        assert replay.truncated
