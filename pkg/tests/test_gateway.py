"""Backends, response parsing, and the scripted policies."""

from __future__ import annotations

import json

import pytest
import requests

from taskguide.envs.wordle import WordList
from taskguide.errors import ConfigError, ReplayExhausted, TransportExhausted
from taskguide.gateway import (
    CompletionRequest,
    ParseFailure,
    RemoteBackend,
    ReplayBackend,
    ScriptedBackend,
    extract_answer_block,
    extract_state_block,
    format_answer,
    format_state_block,
    make_backend,
    parse_action,
)


def _request(user_text: str = "hello") -> CompletionRequest:
    return CompletionRequest(system_text="sys", user_text=user_text)


def _state_prompt(state: dict) -> CompletionRequest:
    return _request("Current state:\n" + format_state_block(state) + "\nGo.")


# -- parsing ----------------------------------------------------------------


def test_completion_request_validation() -> None:
    with pytest.raises(ValueError):
        CompletionRequest("", "user")
    with pytest.raises(ValueError):
        CompletionRequest("sys", "user", temperature=-0.1)
    with pytest.raises(ValueError):
        CompletionRequest("sys", "user", max_output_tokens=0)


def test_extract_answer_block_takes_last() -> None:
    text = "thinking\n```answer\n111\n```\nrevised:\n```answer\n222\n```\n"
    assert extract_answer_block(text) == "222\n"
    assert extract_answer_block("no block here") is None


def test_parse_action_integer() -> None:
    assert parse_action("```answer\n4217\n```", "integer") == 4217
    assert parse_action("text\n```answer\n  -3 \n```", "integer") == -3
    failure = parse_action("```answer\nabout 500\n```", "integer")
    assert isinstance(failure, ParseFailure)
    assert failure.reason == "not_an_integer"
    failure = parse_action("I think 500.", "integer")
    assert isinstance(failure, ParseFailure)
    assert failure.reason == "no_answer_block"
    failure = parse_action("```answer\n\n```", "integer")
    assert isinstance(failure, ParseFailure)
    assert failure.reason == "empty_answer"


def test_parse_action_word() -> None:
    assert parse_action("```answer\nCRANE\n```", "word") == "crane"
    assert parse_action("```answer\ncrane is my guess\n```", "word") == "crane"
    assert parse_action(format_answer("slate"), "word") == "slate"


def test_state_block_round_trip() -> None:
    state = {"env": "gmn", "turn": 2, "observation": {"hint": 40}, "history": []}
    request = _state_prompt(state)
    assert extract_state_block(request.user_text) == state
    with pytest.raises(ValueError):
        extract_state_block("no block")


# -- scripted policies --------------------------------------------------------


def test_echo_policy() -> None:
    backend = ScriptedBackend("echo", echo_value="blorp")
    state = {"env": "gmn", "turn": 0, "observation": {}, "history": []}
    assert backend.complete(_state_prompt(state)) == "```answer\nblorp\n```"


def test_unknown_policy_rejected() -> None:
    with pytest.raises(ConfigError):
        ScriptedBackend("wordle_cheat")


def test_adversarial_policy_always_zzzzz() -> None:
    backend = ScriptedBackend("wordle_adversarial")
    state = {"env": "wordle", "turn": 3, "observation": {"feedback": []}, "history": []}
    assert parse_action(backend.complete(_state_prompt(state)), "word") == "zzzzz"


def test_oracle_policy_plays_first_consistent() -> None:
    words = WordList(
        ["crane", "caret", "crate"], ["crane", "caret", "crate", "cable"]
    )
    backend = ScriptedBackend("wordle_oracle", words=words)
    state = {
        "env": "wordle",
        "turn": 0,
        "observation": {"feedback": []},
        "history": [],
    }
    assert parse_action(backend.complete(_state_prompt(state)), "word") == "crane"
    # 'caret' against secret 'crate': fixes c, excludes t@5... the next
    # consistent answer after feedback ruling out 'crane' placement:
    feedback = [
        {
            "guess": "crane",
            "marks": ["correct", "correct", "correct", "absent", "correct"],
        }
    ]
    state = {
        "env": "wordle",
        "turn": 1,
        "observation": {"feedback": feedback},
        "history": [{"turn": 1, "action": "crane", "reward": 0.0, "observation": {}}],
    }
    assert parse_action(backend.complete(_state_prompt(state)), "word") == "crate"


def test_exact_exploit_probes_then_eliminates() -> None:
    backend = ScriptedBackend("gmn_exact_exploit")

    def ask(turn: int, history: list) -> int:
        state = {"env": "gmn", "turn": turn, "observation": {}, "history": history}
        return parse_action(backend.complete(_state_prompt(state)), "integer")

    assert ask(0, []) == 5000
    noisy = [
        {"turn": t, "action": 5000, "reward": 0.0, "observation": {"hint": 900 + t}}
        for t in range(1, 5)
    ]
    assert ask(4, noisy) == 5000  # hints still noisy, keep anchoring
    exact = noisy + [
        {"turn": 5, "action": 5000, "reward": 0.0, "observation": {"hint": 700}}
    ]
    assert ask(5, exact) == 4300  # smaller candidate first
    wrong_low = exact + [
        {"turn": 6, "action": 4300, "reward": 0.0, "observation": {"hint": 1400}}
    ]
    assert ask(6, wrong_low) == 5700  # other half of the original pair


def test_exact_exploit_keeps_candidates_in_range() -> None:
    backend = ScriptedBackend("gmn_exact_exploit")
    history = [
        {"turn": t, "action": 5000, "reward": 0.0, "observation": {"hint": 4990}}
        for t in range(1, 6)
    ]
    state = {"env": "gmn", "turn": 5, "observation": {}, "history": history}
    action = parse_action(backend.complete(_state_prompt(state)), "integer")
    assert action == 10  # 5000 - 4990; 9990 kept for the next turn


def test_binary_search_uses_latest_hint() -> None:
    backend = ScriptedBackend("gmn_binary_search")
    history = [
        {"turn": 1, "action": 5000, "reward": 0.0, "observation": {"hint": 800}}
    ]
    state = {"env": "gmn", "turn": 1, "observation": {}, "history": history}
    assert parse_action(backend.complete(_state_prompt(state)), "integer") == 4200


# -- replay -------------------------------------------------------------------


def test_replay_backend_in_order_then_exhausted(tmp_path) -> None:
    path = tmp_path / "responses.jsonl"
    with open(path, "w") as fh:
        for i in range(2):
            fh.write(json.dumps({"purpose": "action", "response": f"r{i}"}) + "\n")
    backend = ReplayBackend.from_file(path)
    assert backend.remaining == 2
    assert backend.complete(_request()) == "r0"
    assert backend.complete(_request()) == "r1"
    with pytest.raises(ReplayExhausted):
        backend.complete(_request())


# -- remote -------------------------------------------------------------------


class _FakeResponse:
    def __init__(self, payload, status=200):
        self._payload = payload
        self.status_code = status

    def raise_for_status(self):
        if self.status_code >= 400:
            raise requests.HTTPError(f"status {self.status_code}")

    def json(self):
        return self._payload


def _chat_payload(content: str) -> dict:
    return {"choices": [{"message": {"content": content}}]}


def test_remote_backend_success_and_recording(tmp_path, monkeypatch) -> None:
    seen = {}

    def fake_post(url, json=None, headers=None, timeout=None):
        seen["url"] = url
        seen["json"] = json
        seen["headers"] = headers
        return _FakeResponse(_chat_payload("```answer\n42\n```"))

    monkeypatch.setattr(requests, "post", fake_post)
    record = tmp_path / "responses.jsonl"
    backend = RemoteBackend(
        "https://api.example.test/v1",
        api_key="sk-secret",
        model="m1",
        record_path=str(record),
    )
    out = backend.complete(_request("pick a number"))
    assert out == "```answer\n42\n```"
    assert seen["url"] == "https://api.example.test/v1/chat/completions"
    assert seen["json"]["model"] == "m1"
    assert seen["headers"]["Authorization"] == "Bearer sk-secret"
    logged = record.read_text()
    assert "pick a number" in logged
    assert "sk-secret" not in logged  # the key must never be persisted


def test_remote_backend_retries_then_succeeds(monkeypatch) -> None:
    calls = {"n": 0}
    sleeps: list[float] = []

    def flaky_post(url, **kwargs):
        calls["n"] += 1
        if calls["n"] < 3:
            raise requests.ConnectionError("down")
        return _FakeResponse(_chat_payload("ok"))

    monkeypatch.setattr(requests, "post", flaky_post)
    backend = RemoteBackend(
        "https://x.test", "k", "m", max_attempts=3, backoff_base=0.5,
        sleeper=sleeps.append,
    )
    assert backend.complete(_request()) == "ok"
    assert calls["n"] == 3
    assert sleeps == [0.5, 1.0]  # exponential backoff


def test_remote_backend_exhausts(monkeypatch) -> None:
    def dead_post(url, **kwargs):
        raise requests.ConnectionError("down")

    monkeypatch.setattr(requests, "post", dead_post)
    backend = RemoteBackend(
        "https://x.test", "k", "m", max_attempts=2, sleeper=lambda s: None
    )
    with pytest.raises(TransportExhausted):
        backend.complete(_request())


def test_remote_backend_bad_body_counts_as_failure(monkeypatch) -> None:
    monkeypatch.setattr(
        requests, "post", lambda url, **kw: _FakeResponse({"unexpected": True})
    )
    backend = RemoteBackend(
        "https://x.test", "k", "m", max_attempts=2, sleeper=lambda s: None
    )
    with pytest.raises(TransportExhausted):
        backend.complete(_request())


# -- factory ------------------------------------------------------------------


def test_make_backend_forms(tmp_path, monkeypatch) -> None:
    assert isinstance(make_backend("scripted:echo"), ScriptedBackend)
    path = tmp_path / "r.jsonl"
    path.write_text(json.dumps({"response": "x"}) + "\n")
    assert isinstance(make_backend(f"replay:{path}"), ReplayBackend)
    with pytest.raises(ConfigError):
        make_backend("replay:/nonexistent/file.jsonl")
    with pytest.raises(ConfigError):
        make_backend("scripted:")
    with pytest.raises(ConfigError):
        make_backend("llm")
    monkeypatch.delenv("TASKGUIDE_ENDPOINT", raising=False)
    monkeypatch.delenv("TASKGUIDE_API_KEY", raising=False)
    with pytest.raises(ConfigError):
        make_backend("remote")
    monkeypatch.setenv("TASKGUIDE_ENDPOINT", "https://x.test")
    monkeypatch.setenv("TASKGUIDE_API_KEY", "k")
    assert isinstance(make_backend("remote"), RemoteBackend)
