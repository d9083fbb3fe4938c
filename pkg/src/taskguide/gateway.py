"""Completion backends and action parsing.

Every agent variant talks to a backend through one interface: it sends a
:class:`CompletionRequest` and gets text back.  Three implementations:

* ``RemoteBackend`` - a chat-completions HTTP endpoint with retry/backoff;
* ``ScriptedBackend`` - deterministic policies that read the machine-readable
  state block embedded in the prompt; used for tests and offline runs;
* ``ReplayBackend`` - replays previously recorded responses verbatim.

Responses carry the chosen action in a fenced ``answer`` block, so parsing is
identical no matter which backend produced the text.
"""

from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass
from typing import Any, Callable, Protocol, Sequence

import requests

from . import constraints
from .envs.wordle import WordList, load_word_list
from .errors import ConfigError, ReplayExhausted, TransportExhausted

ENDPOINT_VAR = "TASKGUIDE_ENDPOINT"
API_KEY_VAR = "TASKGUIDE_API_KEY"
MODEL_VAR = "TASKGUIDE_MODEL"

_ANSWER_RE = re.compile(r"```answer\s*\n(.*?)```", re.DOTALL)
_STATE_RE = re.compile(r"```state\s*\n(.*?)```", re.DOTALL)

GMN_RANGE = (0, 10000)


@dataclass(frozen=True)
class CompletionRequest:
    system_text: str
    user_text: str
    temperature: float = 0.0
    max_output_tokens: int = 256
    purpose: str = "action"  # action | profiling | rule_extraction

    def __post_init__(self) -> None:
        if not self.system_text or not self.user_text:
            raise ValueError("prompt texts must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be positive")


@dataclass(frozen=True)
class ParseFailure:
    """The response text did not contain a usable action."""

    reason: str
    raw: str


class CompletionBackend(Protocol):
    def complete(self, request: CompletionRequest) -> str: ...


def format_answer(action: Any) -> str:
    return f"```answer\n{action}\n```"


def format_state_block(state: dict) -> str:
    return "```state\n" + json.dumps(state, separators=(",", ":")) + "\n```"


def extract_answer_block(text: str) -> str | None:
    """Contents of the last fenced answer block, or None."""
    found = _ANSWER_RE.findall(text)
    return found[-1] if found else None


def extract_state_block(text: str) -> dict:
    found = _STATE_RE.findall(text)
    if not found:
        raise ValueError("prompt carries no state block")
    return json.loads(found[-1])


def parse_action(text: str, action_kind: str) -> Any | ParseFailure:
    """Pull the action out of a response.

    Integer answers must parse as a plain int; word answers are lowercased
    and reduced to their first token.  Shape validity beyond that is the
    environment's call, not the parser's.
    """
    block = extract_answer_block(text)
    if block is None:
        return ParseFailure("no_answer_block", text)
    content = block.strip()
    if not content:
        return ParseFailure("empty_answer", text)
    if action_kind == "integer":
        try:
            return int(content)
        except ValueError:
            return ParseFailure("not_an_integer", text)
    token = content.split()[0].lower()
    return token


# -- scripted policies ----------------------------------------------------


def _history_actions(state: dict) -> list[Any]:
    return [entry["action"] for entry in state.get("history", [])]


def _policy_echo(state: dict, value: str) -> Any:
    del state
    return value


def _policy_wordle_adversarial(state: dict) -> str:
    del state
    return "zzzzz"


def _policy_wordle_oracle(state: dict, pool: Sequence[str]) -> str:
    feedback = state["observation"].get("feedback", [])
    constraint_state = constraints.state_from_history(
        (entry["guess"], entry["marks"]) for entry in feedback
    )
    for word in pool:
        if constraints.is_consistent(constraint_state, word):
            return word
    return pool[0]  # unreachable with honest feedback; stay total anyway


def _gmn_candidates(anchor: int, distance: int, tried: set[int]) -> list[int]:
    low, high = GMN_RANGE
    pair = {anchor - distance, anchor + distance}
    return sorted(c for c in pair if low <= c <= high and c not in tried)


def _policy_gmn_exact_exploit(state: dict) -> int:
    """Probe the midpoint until hints are exact, then eliminate the pair.

    From turn 5 the hint equals the true distance d, so after anchoring at
    guess g the secret is one of {g-d, g+d}; at most two more guesses win.
    """
    tried = set(_history_actions(state))
    for entry in state.get("history", []):
        if entry["turn"] < 5:
            continue
        hint = entry["observation"].get("hint")
        if hint is None:
            continue
        remaining = _gmn_candidates(entry["action"], hint, tried)
        if remaining:
            return remaining[0]
    return 5000


def _policy_gmn_binary_search(state: dict) -> int:
    """Noise-blind elimination: treat every hint as exact immediately."""
    history = state.get("history", [])
    if not history:
        return 5000
    tried = set(_history_actions(state))
    last = history[-1]
    hint = last["observation"].get("hint")
    if hint is not None:
        remaining = _gmn_candidates(last["action"], hint, tried)
        if remaining:
            return remaining[0]
    low, high = GMN_RANGE
    probe = (5000 + 1237 * state.get("turn", 0)) % (high + 1)
    while probe in tried:
        probe = (probe + 1) % (high + 1)
    return probe


SCRIPTED_POLICIES = (
    "echo",
    "gmn_binary_search",
    "gmn_exact_exploit",
    "wordle_adversarial",
    "wordle_oracle",
)


class ScriptedBackend:
    """Deterministic stand-in for a language model.

    Reads the fenced state block the agent embeds in every action prompt and
    answers in the same fenced-answer format a live model is instructed to
    use, so the parsing path downstream is shared.
    """

    def __init__(
        self,
        policy: str,
        words: WordList | None = None,
        echo_value: str = "echo!",
        pool: str = "answers",
    ) -> None:
        if policy not in SCRIPTED_POLICIES:
            raise ConfigError(
                f"unknown scripted policy {policy!r}; "
                f"expected one of {', '.join(SCRIPTED_POLICIES)}"
            )
        self.policy = policy
        self.echo_value = echo_value
        self._pool_name = pool
        self._words = words
        self._pool: tuple[str, ...] | None = None

    def _word_pool(self) -> tuple[str, ...]:
        if self._pool is None:
            words = self._words if self._words is not None else load_word_list()
            self._words = words
            self._pool = (
                words.answers if self._pool_name == "answers" else words.allowed
            )
        return self._pool

    def complete(self, request: CompletionRequest) -> str:
        state = extract_state_block(request.user_text)
        if self.policy == "echo":
            action: Any = self.echo_value
        elif self.policy == "wordle_adversarial":
            action = _policy_wordle_adversarial(state)
        elif self.policy == "wordle_oracle":
            action = _policy_wordle_oracle(state, self._word_pool())
        elif self.policy == "gmn_exact_exploit":
            action = _policy_gmn_exact_exploit(state)
        else:
            action = _policy_gmn_binary_search(state)
        return format_answer(action)


class ReplayBackend:
    """Feed back recorded responses in order; not safe for concurrent use."""

    def __init__(self, responses: Sequence[str]) -> None:
        self._responses = list(responses)
        self._cursor = 0

    @classmethod
    def from_file(cls, path) -> "ReplayBackend":
        responses = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    responses.append(json.loads(line)["response"])
        return cls(responses)

    @property
    def remaining(self) -> int:
        return len(self._responses) - self._cursor

    def complete(self, request: CompletionRequest) -> str:
        del request
        if self._cursor >= len(self._responses):
            raise ReplayExhausted(
                f"all {len(self._responses)} recorded responses consumed"
            )
        response = self._responses[self._cursor]
        self._cursor += 1
        return response


class RemoteBackend:
    """Chat-completions HTTP backend with bounded retry.

    Transient failures (network errors, non-2xx, unparseable bodies) are
    retried with exponential backoff; after `max_attempts` total tries a
    :class:`TransportExhausted` is raised with the last failure attached.
    The API key is sent in the Authorization header and never logged.
    """

    def __init__(
        self,
        endpoint: str,
        api_key: str,
        model: str,
        timeout: float = 30.0,
        max_attempts: int = 3,
        backoff_base: float = 0.5,
        sleeper: Callable[[float], None] = time.sleep,
        record_path: str | None = None,
    ) -> None:
        if max_attempts < 1:
            raise ValueError("max_attempts must be positive")
        self.endpoint = endpoint.rstrip("/")
        self._api_key = api_key
        self.model = model
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self._sleep = sleeper
        self.record_path = record_path

    @classmethod
    def from_environment(cls, record_path: str | None = None) -> "RemoteBackend":
        endpoint = os.environ.get(ENDPOINT_VAR, "")
        api_key = os.environ.get(API_KEY_VAR, "")
        if not endpoint or not api_key:
            raise ConfigError(
                f"remote backend needs {ENDPOINT_VAR} and {API_KEY_VAR} set"
            )
        model = os.environ.get(MODEL_VAR, "default")
        return cls(endpoint, api_key, model, record_path=record_path)

    def complete(self, request: CompletionRequest) -> str:
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        headers = {"Authorization": f"Bearer {self._api_key}"}
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            try:
                response = requests.post(
                    f"{self.endpoint}/chat/completions",
                    json=payload,
                    headers=headers,
                    timeout=self.timeout,
                )
                response.raise_for_status()
                body = response.json()
                content = body["choices"][0]["message"]["content"]
                if not isinstance(content, str):
                    raise ValueError("response content is not text")
            except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
                last_error = exc
                if attempt + 1 < self.max_attempts:
                    self._sleep(self.backoff_base * 2**attempt)
                continue
            if self.record_path:
                self._record(request, content)
            return content
        raise TransportExhausted(
            f"remote backend failed after {self.max_attempts} attempts"
        ) from last_error

    def _record(self, request: CompletionRequest, response: str) -> None:
        entry = {
            "purpose": request.purpose,
            "system": request.system_text,
            "user": request.user_text,
            "response": response,
        }
        with open(self.record_path, "a") as fh:
            fh.write(json.dumps(entry, separators=(",", ":")) + "\n")


def make_backend(
    spec: str,
    words: WordList | None = None,
    record_path: str | None = None,
) -> CompletionBackend:
    """Build a backend from its config string.

    Accepted forms: ``remote``, ``scripted:<policy>``, ``replay:<path>``.
    """
    if spec == "remote":
        return RemoteBackend.from_environment(record_path=record_path)
    kind, _, arg = spec.partition(":")
    if kind == "scripted" and arg:
        return ScriptedBackend(arg, words=words)
    if kind == "replay" and arg:
        if not os.path.exists(arg):
            raise ConfigError(f"replay file not found: {arg}")
        return ReplayBackend.from_file(arg)
    raise ConfigError(
        f"unrecognized backend {spec!r}; "
        "use remote, scripted:<policy>, or replay:<path>"
    )
