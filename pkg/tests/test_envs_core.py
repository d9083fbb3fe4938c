"""Record types, schema validation, and serialization round-trips."""

from __future__ import annotations

import pytest

from taskguide.envs.core import (
    EnvSpec,
    EpochLog,
    FieldSpec,
    StepRecord,
    Trajectory,
    trajectory_from_line,
    trajectory_to_line,
)


def _field(name: str = "x") -> FieldSpec:
    return FieldSpec(name, "integer", "a number")


def test_env_spec_rejects_bad_shapes() -> None:
    with pytest.raises(ValueError):
        EnvSpec("", "g", (_field(),), (_field(),), "r", 5)
    with pytest.raises(ValueError):
        EnvSpec("e", "g", (_field(),), (_field(),), "r", 0)
    with pytest.raises(ValueError):
        EnvSpec("e", "g", (_field("a"), _field("a")), (_field(),), "r", 5)
    with pytest.raises(ValueError):
        EnvSpec("e", "g", (_field(),), (), "r", 5)


def test_env_spec_describe_mentions_fields() -> None:
    spec = EnvSpec("e", "win the game", (_field("hint"),), (_field("guess"),), "r", 5)
    text = spec.describe()
    assert "hint" in text and "guess" in text and "win the game" in text
    assert "5 turns" in text


def _record(turn: int = 1, done: bool = False, reward: float = 0.0) -> StepRecord:
    return StepRecord(
        turn=turn,
        observation_before={"turn": turn - 1},
        proposed_action=7,
        committed_action=7,
        valid_on_first_try=True,
        fallback_used=False,
        applied_rule_ids=[],
        reward=reward,
        done=done,
    )


def test_step_record_round_trip() -> None:
    rec = _record()
    assert StepRecord.from_json(rec.to_json()) == rec


def test_step_record_violation_field_only_when_present() -> None:
    rec = _record()
    assert "violation" not in rec.to_json()
    rec.violation = "out_of_range: guess -3"
    assert rec.to_json()["violation"].startswith("out_of_range")


def test_trajectory_from_steps_derives_summary() -> None:
    steps = [_record(1), _record(2, done=True, reward=50.0)]
    traj = Trajectory.from_steps(seed=9, steps=steps)
    assert traj.final_reward == 50.0
    assert traj.success is True
    assert traj.turn_count == 2
    traj.validate()


def test_trajectory_failure_has_zero_reward() -> None:
    traj = Trajectory.from_steps(3, [_record(1, done=True, reward=0.0)])
    assert not traj.success
    traj.validate()


def test_trajectory_validate_catches_bad_turn_numbering() -> None:
    traj = Trajectory.from_steps(3, [_record(2, done=True)])
    with pytest.raises(ValueError):
        traj.validate()


def test_trajectory_validate_catches_mid_episode_done() -> None:
    traj = Trajectory.from_steps(3, [_record(1, done=True), _record(2, done=True)])
    with pytest.raises(ValueError):
        traj.validate()


def test_trajectory_jsonl_round_trip_and_field_names() -> None:
    traj = Trajectory.from_steps(11, [_record(1), _record(2, done=True, reward=25.0)])
    line = trajectory_to_line(traj)
    assert "\n" not in line
    back = trajectory_from_line(line)
    assert back == traj
    payload = traj.to_json()
    assert set(payload) == {"seed", "steps", "final_reward", "success", "turn_count"}
    assert set(payload["steps"][0]) == {
        "turn",
        "observation_before",
        "proposed_action",
        "committed_action",
        "valid_on_first_try",
        "fallback_used",
        "applied_rule_ids",
        "reward",
        "done",
    }


def test_serialization_is_byte_stable() -> None:
    traj = Trajectory.from_steps(11, [_record(1, done=True, reward=100 / 3)])
    assert trajectory_to_line(traj) == trajectory_to_line(
        trajectory_from_line(trajectory_to_line(traj))
    )


def test_aborted_trajectory_keeps_diagnostic() -> None:
    traj = Trajectory.from_steps(5, [_record(1)], aborted=True, diagnostic="transport")
    traj.validate()
    back = trajectory_from_line(trajectory_to_line(traj))
    assert back.aborted and back.diagnostic == "transport"


def test_epoch_log_aggregates() -> None:
    log = EpochLog(
        epoch=1,
        trajectories=[
            Trajectory.from_steps(1, [_record(1, done=True, reward=100.0)]),
            Trajectory.from_steps(2, [_record(1), _record(2, done=True)]),
        ],
    )
    assert log.rewards == [100.0, 0.0]
    assert log.successes == 1
    assert len(list(log.all_steps())) == 3
