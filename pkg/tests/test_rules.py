"""Rule identity, matching, lifecycle transitions, and persistence."""

from __future__ import annotations

import pytest

from taskguide.envs.core import StepRecord
from taskguide.envs.wordle import score_guess
from taskguide.errors import MalformedRule, SchemaVersionMismatch, UnknownRule
from taskguide.rules import (
    ActionDirective,
    Condition,
    Predicate,
    Rule,
    RuleBank,
    directive_matches,
    evaluate_directive,
    make_rule,
    rule_id,
)


def _plus_rule(window=(2, 15), free_text="") -> Rule:
    return make_rule(
        Condition((Predicate("hint", "present"),), window),
        ActionDirective("template", "previous_guess_plus_hint"),
        free_text=free_text,
    )


def _minus_rule() -> Rule:
    return make_rule(
        Condition((Predicate("hint", "present"),), (2, 15)),
        ActionDirective("template", "previous_guess_minus_hint"),
    )


def _policy_rule() -> Rule:
    return make_rule(
        Condition((Predicate("feedback", "present"),), (1, 6)),
        ActionDirective("policy", "consistent_candidates"),
    )


def _step(turn: int, committed, observation_before=None) -> StepRecord:
    return StepRecord(
        turn=turn,
        observation_before=observation_before or {"turn": turn - 1},
        proposed_action=committed,
        committed_action=committed,
        valid_on_first_try=True,
        fallback_used=False,
        applied_rule_ids=[],
        reward=0.0,
        done=False,
    )


# -- identity ---------------------------------------------------------------


def test_id_ignores_free_text_and_predicate_order() -> None:
    a = make_rule(
        Condition((Predicate("hint", "present"), Predicate("turn", ">=", 2))),
        ActionDirective("constant", 5000),
        free_text="probe the middle",
    )
    b = make_rule(
        Condition((Predicate("turn", ">=", 2), Predicate("hint", "present"))),
        ActionDirective("constant", 5000),
        free_text="",
    )
    assert a.id == b.id


def test_id_distinguishes_content() -> None:
    assert _plus_rule().id != _minus_rule().id
    assert _plus_rule().id != _plus_rule(window=(3, 15)).id
    assert len(_plus_rule().id) == 16


def test_make_rule_rejects_malformed() -> None:
    with pytest.raises(MalformedRule):
        make_rule(Condition(()), ActionDirective("constant", 1))
    with pytest.raises(MalformedRule):
        make_rule(
            Condition((Predicate("x", "~="),)), ActionDirective("constant", 1)
        )
    with pytest.raises(MalformedRule):
        make_rule(
            Condition((Predicate("x", "present"),), (0, 5)),
            ActionDirective("constant", 1),
        )
    with pytest.raises(MalformedRule):
        make_rule(
            Condition((Predicate("x", "present"),), (5, 2)),
            ActionDirective("constant", 1),
        )
    with pytest.raises(MalformedRule):
        make_rule(
            Condition((Predicate("x", "present"),)),
            ActionDirective("template", "triple_the_hint"),
        )
    with pytest.raises(MalformedRule):
        make_rule(
            Condition((Predicate("x", "present"),)),
            ActionDirective("oracle", "just_win"),
        )
    with pytest.raises(MalformedRule):
        make_rule(
            Condition((Predicate("x", "present"),)),
            ActionDirective("constant", None),
        )


# -- condition matching -------------------------------------------------


def test_predicates() -> None:
    obs = {"turn": 3, "hint": 40, "empty": None}
    assert Predicate("hint", "present").matches(obs)
    assert not Predicate("missing", "present").matches(obs)
    assert not Predicate("empty", "present").matches(obs)  # None counts absent
    assert Predicate("empty", "absent").matches(obs)
    assert Predicate("turn", "=", 3).matches(obs)
    assert Predicate("turn", "!=", 4).matches(obs)
    assert not Predicate("missing", "!=", 4).matches(obs)  # needs the field
    assert Predicate("hint", ">=", 40).matches(obs)
    assert Predicate("hint", "<", 41).matches(obs)
    assert not Predicate("hint", "<", "forty").matches(obs)  # type mismatch


def test_condition_window() -> None:
    cond = Condition((Predicate("hint", "present"),), (2, 4))
    obs = {"hint": 10}
    assert not cond.matches(obs, 1)
    assert cond.matches(obs, 2)
    assert cond.matches(obs, 4)
    assert not cond.matches(obs, 5)


# -- bank behavior ------------------------------------------------------


def test_register_is_idempotent_and_keeps_stats() -> None:
    bank = RuleBank()
    rid = bank.register(_plus_rule())
    bank.record_outcome(rid, True)
    again = bank.register(_plus_rule(free_text="rediscovered"))
    assert again == rid
    assert len(bank) == 1
    assert bank.get(rid).applications == 1


def test_register_merges_provenance() -> None:
    bank = RuleBank()
    r1 = make_rule(
        Condition((Predicate("hint", "present"),)),
        ActionDirective("constant", 1),
        source_seeds=[3, 1],
    )
    bank.register(r1)
    r2 = make_rule(
        Condition((Predicate("hint", "present"),)),
        ActionDirective("constant", 1),
        source_seeds=[2],
    )
    bank.register(r2)
    assert bank.get(r1.id).source_seeds == (1, 2, 3)


def test_register_rejects_tampered_id() -> None:
    rule = _plus_rule()
    rule.id = "0" * 16
    with pytest.raises(MalformedRule):
        RuleBank().register(rule)


def test_applicable_filters_and_orders() -> None:
    bank = RuleBank()
    plus = bank.register(_plus_rule())
    minus = bank.register(_minus_rule())
    obs = {"hint": 40}
    # Fresh rules: both rank 0.0, tie broken by id.
    got = [r.id for r in bank.applicable(obs, 3)]
    assert sorted(got) == sorted([plus, minus])
    assert got == sorted([plus, minus])
    # Give minus a record: it should now lead.
    bank.record_outcome(minus, True)
    got = [r.id for r in bank.applicable(obs, 3)]
    assert got[0] == minus
    # Window excludes turn 1; missing hint excludes all.
    assert bank.applicable(obs, 1) == []
    assert bank.applicable({"turn": 3}, 3) == []


def test_applicable_excludes_retired_always() -> None:
    bank = RuleBank(min_applications=2, retire_threshold=0.5)
    rid = bank.register(_plus_rule())
    bank.record_outcome(rid, False)
    bank.record_outcome(rid, False)
    assert bank.get(rid).status == "retired"
    assert bank.applicable({"hint": 1}, 3) == []


def test_applicable_can_exclude_candidates() -> None:
    bank = RuleBank(include_candidates=False, min_applications=1)
    rid = bank.register(_plus_rule())
    assert bank.applicable({"hint": 1}, 3) == []
    bank.record_outcome(rid, True)  # promoted at 1/1
    assert [r.id for r in bank.applicable({"hint": 1}, 3)] == [rid]


def test_lifecycle_promotion_and_retirement() -> None:
    bank = RuleBank(min_applications=5, promote_threshold=0.8, retire_threshold=0.4)
    rid = bank.register(_plus_rule())
    for outcome in (True, True, True, True):
        assert bank.record_outcome(rid, outcome).status == "candidate"
    assert bank.record_outcome(rid, True).status == "verified"  # 5/5

    other = bank.register(_minus_rule())
    for outcome in (False, False, False, True):
        bank.record_outcome(other, outcome)
    assert bank.get(other).status == "candidate"
    assert bank.record_outcome(other, False).status == "retired"  # 1/5 = 0.2


def test_no_transition_before_min_applications() -> None:
    bank = RuleBank(min_applications=5)
    rid = bank.register(_plus_rule())
    for _ in range(4):
        bank.record_outcome(rid, False)  # 0/4, still candidate
    assert bank.get(rid).status == "candidate"


def test_verified_is_sticky() -> None:
    bank = RuleBank(min_applications=1)
    rid = bank.register(_plus_rule())
    bank.record_outcome(rid, True)
    assert bank.get(rid).status == "verified"
    for _ in range(10):
        bank.record_outcome(rid, False)
    assert bank.get(rid).status == "verified"


def test_record_outcome_unknown_rule() -> None:
    with pytest.raises(UnknownRule):
        RuleBank().record_outcome("feedbeef" * 2, True)


def test_counts_by_status() -> None:
    bank = RuleBank(min_applications=1)
    bank.register(_plus_rule())
    rid = bank.register(_minus_rule())
    bank.record_outcome(rid, True)
    assert bank.counts_by_status() == {"candidate": 1, "retired": 0, "verified": 1}


# -- persistence --------------------------------------------------------


def test_save_load_round_trip(tmp_path) -> None:
    bank = RuleBank(min_applications=3, promote_threshold=0.7, retire_threshold=0.3)
    rid = bank.register(_plus_rule(free_text="keep the streak"))
    bank.register(_policy_rule())
    bank.record_outcome(rid, True)
    path = tmp_path / "bank.json"
    bank.save(path)
    loaded = RuleBank.load(path)
    assert loaded.to_dict() == bank.to_dict()
    assert loaded.fingerprint() == bank.fingerprint()
    assert loaded.get(rid).free_text == "keep the streak"


def test_load_rejects_unknown_version(tmp_path) -> None:
    path = tmp_path / "bank.json"
    path.write_text('{"version": 99, "rules": []}')
    with pytest.raises(SchemaVersionMismatch):
        RuleBank.load(path)


def test_fingerprint_tracks_changes() -> None:
    bank = RuleBank()
    before = bank.fingerprint()
    rid = bank.register(_plus_rule())
    assert bank.fingerprint() != before
    mid = bank.fingerprint()
    bank.record_outcome(rid, True)
    assert bank.fingerprint() != mid


# -- directive evaluation ------------------------------------------------


def test_evaluate_templates() -> None:
    history = [_step(1, 5000)]
    obs = {"turn": 1, "hint": 700, "turns_remaining": 14}
    assert evaluate_directive(_plus_rule(), obs, history) == 5700
    assert evaluate_directive(_minus_rule(), obs, history) == 4300
    # Missing prerequisites evaluate to None.
    assert evaluate_directive(_plus_rule(), obs, []) is None
    assert evaluate_directive(_plus_rule(), {"turn": 0}, history) is None


def test_evaluate_interval_midpoint() -> None:
    rule = make_rule(
        Condition((Predicate("hint", "present"),), (5, 15)),
        ActionDirective("template", "interval_midpoint"),
    )
    steps = [
        _step(5, 4200, {"turn": 4, "hint": 999, "turns_remaining": 11}),
    ]
    obs = {"turn": 5, "hint": 300, "turns_remaining": 10}
    # Band [3900, 4500] -> midpoint 4200.
    assert evaluate_directive(rule, obs, steps) == 4200
    assert evaluate_directive(rule, {"turn": 0}, []) is None


def test_evaluate_constant_and_policy() -> None:
    const = make_rule(
        Condition((Predicate("turn", "=", 0),)), ActionDirective("constant", 5000)
    )
    assert evaluate_directive(const, {"turn": 0}, []) == 5000
    assert evaluate_directive(_policy_rule(), {"feedback": []}, []) is None


def test_directive_matches_templates() -> None:
    history = [_step(1, 5000)]
    obs = {"turn": 1, "hint": 700}
    assert directive_matches(_plus_rule(), obs, history, 5700)
    assert not directive_matches(_plus_rule(), obs, history, 5701)
    assert not directive_matches(_plus_rule(), obs, [], 5700)  # nothing to add


def test_directive_matches_policy() -> None:
    marks = list(score_guess("crane", "caret"))
    obs = {"turn": 1, "feedback": [{"guess": "caret", "marks": marks}]}
    rule = _policy_rule()
    assert directive_matches(rule, obs, [], "crane")
    assert not directive_matches(rule, obs, [], "caret")  # t is banned
    assert not directive_matches(rule, obs, [], 42)
    allowed = frozenset({"caret", "cable"})
    assert not directive_matches(rule, obs, [], "crane", allowed_words=allowed)


def test_directive_matches_policy_empty_feedback() -> None:
    # Before any feedback every word is consistent.
    assert directive_matches(_policy_rule(), {"feedback": []}, [], "crane")
