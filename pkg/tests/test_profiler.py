"""Task profiling: heuristic classification and llm-backed refresh."""

from __future__ import annotations

import logging

import pytest

from taskguide.envs.guess_number import GUESS_NUMBER_SPEC
from taskguide.envs.wordle import make_spec
from taskguide.errors import TransportExhausted
from taskguide.gateway import CompletionRequest
from taskguide.profiler import (
    Profiler,
    TaskProfile,
    heuristic_profile,
    parse_profile_response,
)

WORDLE_SPEC = make_spec(hard_validity=True)


class _StubBackend:
    def __init__(self, responses):
        self._responses = list(responses)
        self.requests: list[CompletionRequest] = []

    def complete(self, request: CompletionRequest) -> str:
        self.requests.append(request)
        item = self._responses.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


def _profile_block(**overrides) -> str:
    values = {
        "temporal_structure": "cumulative",
        "constraint_intensity": "heavy",
        "generation_strategy": "enumeration",
        "reasoning_window": "6",
        "rationale": "feedback accumulates",
    }
    values.update(overrides)
    lines = "\n".join(f"{k}: {v}" for k, v in values.items())
    return f"Let me think.\n```profile\n{lines}\n```\n"


def test_profile_validation() -> None:
    with pytest.raises(ValueError):
        TaskProfile("episodic", "light", "direct", 5)
    with pytest.raises(ValueError):
        TaskProfile("sequential", "soft", "direct", 5)
    with pytest.raises(ValueError):
        TaskProfile("sequential", "light", "guess", 5)
    with pytest.raises(ValueError):
        TaskProfile("sequential", "light", "direct", 0)
    # enumeration presumes a constrained candidate set
    with pytest.raises(ValueError):
        TaskProfile("sequential", "light", "enumeration", 5)


def test_same_categories_ignores_rationale() -> None:
    a = TaskProfile("sequential", "light", "direct", 15, rationale="one")
    b = TaskProfile("sequential", "light", "direct", 15, rationale="two")
    c = TaskProfile("sequential", "heavy", "direct", 15, rationale="one")
    assert a.same_categories(b)
    assert not a.same_categories(c)


def test_round_trip() -> None:
    profile = heuristic_profile(WORDLE_SPEC)
    assert TaskProfile.from_dict(profile.to_dict()) == profile


def test_heuristic_number_guessing() -> None:
    profile = heuristic_profile(GUESS_NUMBER_SPEC)
    assert profile.temporal_structure == "sequential"
    assert profile.constraint_intensity == "light"
    assert profile.generation_strategy == "direct"
    assert profile.reasoning_window == 15


def test_heuristic_word_guessing() -> None:
    profile = heuristic_profile(WORDLE_SPEC)
    assert profile.temporal_structure == "cumulative"
    assert profile.constraint_intensity == "heavy"
    assert profile.generation_strategy == "enumeration"
    assert profile.reasoning_window == 6


def test_parse_profile_response() -> None:
    parsed = parse_profile_response(_profile_block(), max_turns=6)
    assert parsed is not None
    assert parsed.temporal_structure == "cumulative"
    assert parsed.rationale == "feedback accumulates"


def test_parse_profile_last_block_wins() -> None:
    text = _profile_block(temporal_structure="sequential") + _profile_block()
    parsed = parse_profile_response(text, max_turns=6)
    assert parsed is not None and parsed.temporal_structure == "cumulative"


def test_parse_profile_rejects_junk() -> None:
    assert parse_profile_response("no block at all", 6) is None
    assert parse_profile_response("```profile\ngibberish\n```", 6) is None
    assert parse_profile_response(_profile_block(reasoning_window="soon"), 6) is None
    assert (
        parse_profile_response(_profile_block(constraint_intensity="max"), 6) is None
    )


def test_parse_profile_clamps_window() -> None:
    parsed = parse_profile_response(_profile_block(reasoning_window="40"), 6)
    assert parsed is not None and parsed.reasoning_window == 6
    parsed = parse_profile_response(_profile_block(reasoning_window="-2"), 6)
    assert parsed is not None and parsed.reasoning_window == 1


def test_profiler_ctor_validation() -> None:
    with pytest.raises(ValueError):
        Profiler(WORDLE_SPEC, backend="oracle")
    with pytest.raises(ValueError):
        Profiler(WORDLE_SPEC, backend="llm")


def test_llm_profiler_parses_response() -> None:
    backend = _StubBackend([_profile_block()])
    profiler = Profiler(WORDLE_SPEC, backend="llm", gateway=backend)
    profile = profiler.profile(epoch_summaries=["epoch 1: mean 40"])
    assert profile.generation_strategy == "enumeration"
    assert "epoch 1: mean 40" in backend.requests[0].user_text
    assert backend.requests[0].purpose == "profiling"


def test_llm_profiler_degrades_to_heuristic(caplog) -> None:
    backend = _StubBackend(["I refuse to answer in the requested format."])
    profiler = Profiler(WORDLE_SPEC, backend="llm", gateway=backend)
    with caplog.at_level(logging.WARNING):
        profile = profiler.profile()
    assert profile == heuristic_profile(WORDLE_SPEC)
    assert any("unusable" in r.message for r in caplog.records)


def test_llm_profiler_transport_failure_propagates() -> None:
    backend = _StubBackend([TransportExhausted("gone")])
    profiler = Profiler(WORDLE_SPEC, backend="llm", gateway=backend)
    with pytest.raises(TransportExhausted):
        profiler.profile()


def test_reprofile_only_reports_category_shifts() -> None:
    prior = heuristic_profile(WORDLE_SPEC)
    same = _profile_block(rationale="different words, same categories")
    backend = _StubBackend([same, _profile_block(temporal_structure="sequential",
                                                 generation_strategy="enumeration")])
    profiler = Profiler(WORDLE_SPEC, backend="llm", gateway=backend)
    profile, changed = profiler.reprofile_if_shifted(prior)
    assert profile is prior and not changed
    profile, changed = profiler.reprofile_if_shifted(prior)
    assert changed and profile.temporal_structure == "sequential"
