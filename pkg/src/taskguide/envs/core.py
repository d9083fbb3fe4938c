"""Observation-action environment interface and trajectory record types.

An environment owns its own seeded randomness and episode state.  Agents see
only observations (JSON-compatible dicts); everything an agent did and saw is
captured in :class:`StepRecord` rows so a finished trajectory can be replayed
and audited without the original process.
"""

from __future__ import annotations

import abc
import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from ..errors import StepAfterDone

Observation = dict[str, Any]
Action = Any  # int for numeric tasks, str for word tasks


@dataclass(frozen=True)
class FieldSpec:
    """One named field of an observation or action schema."""

    name: str
    kind: str  # "integer" | "word" | "list" | "marks"
    description: str

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("field name must be non-empty")


@dataclass(frozen=True)
class EnvSpec:
    """Static description of an environment.

    Rich enough that prompt composition and task profiling are pure functions
    of this record: they never need to poke at a live environment instance.
    """

    name: str
    goal: str
    observation_fields: tuple[FieldSpec, ...]
    action_fields: tuple[FieldSpec, ...]
    reward_description: str
    max_turns: int
    # True when action validity depends on the episode history (e.g. feedback
    # accumulated so far), not just on the action's shape.
    validity_uses_history: bool = False

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("environment name must be non-empty")
        if self.max_turns < 1:
            raise ValueError("max_turns must be at least 1")
        names = [f.name for f in self.observation_fields]
        if len(names) != len(set(names)):
            raise ValueError("duplicate observation field names")
        if not self.action_fields:
            raise ValueError("action schema must have at least one field")

    @property
    def action_kind(self) -> str:
        return self.action_fields[0].kind

    def describe(self) -> str:
        """Plain-text rendering used in prompts."""
        lines = [f"Task: {self.goal}"]
        lines.append(f"Turn budget: {self.max_turns} turns.")
        lines.append(f"Reward: {self.reward_description}")
        lines.append("You observe per turn:")
        for f in self.observation_fields:
            lines.append(f"  - {f.name} ({f.kind}): {f.description}")
        lines.append("Your action each turn:")
        for f in self.action_fields:
            lines.append(f"  - {f.name} ({f.kind}): {f.description}")
        return "\n".join(lines)


@dataclass
class StepRecord:
    """Everything about a single committed turn.

    `observation_before` is what the agent saw when choosing; the resulting
    observation is the next record's `observation_before` (or the terminal
    observation, which is not logged separately).  `violation` is present
    only when the first proposal was rejected and explains why.
    """

    turn: int
    observation_before: Observation
    proposed_action: Any
    committed_action: Action
    valid_on_first_try: bool
    fallback_used: bool
    applied_rule_ids: list[str]
    reward: float
    done: bool
    violation: str | None = None

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "turn": self.turn,
            "observation_before": self.observation_before,
            "proposed_action": self.proposed_action,
            "committed_action": self.committed_action,
            "valid_on_first_try": self.valid_on_first_try,
            "fallback_used": self.fallback_used,
            "applied_rule_ids": list(self.applied_rule_ids),
            "reward": self.reward,
            "done": self.done,
        }
        if self.violation is not None:
            out["violation"] = self.violation
        return out

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "StepRecord":
        return cls(
            turn=data["turn"],
            observation_before=dict(data["observation_before"]),
            proposed_action=data["proposed_action"],
            committed_action=data["committed_action"],
            valid_on_first_try=data["valid_on_first_try"],
            fallback_used=data["fallback_used"],
            applied_rule_ids=list(data["applied_rule_ids"]),
            reward=data["reward"],
            done=data["done"],
            violation=data.get("violation"),
        )


@dataclass
class Trajectory:
    """One full episode: the seed that determined it plus its step records."""

    seed: int
    steps: list[StepRecord]
    final_reward: float
    success: bool
    turn_count: int
    aborted: bool = False
    diagnostic: str | None = None

    @classmethod
    def from_steps(
        cls,
        seed: int,
        steps: Sequence[StepRecord],
        aborted: bool = False,
        diagnostic: str | None = None,
    ) -> "Trajectory":
        steps = list(steps)
        final_reward = steps[-1].reward if steps else 0.0
        return cls(
            seed=seed,
            steps=steps,
            final_reward=final_reward,
            success=final_reward > 0,
            turn_count=len(steps),
            aborted=aborted,
            diagnostic=diagnostic,
        )

    def validate(self) -> None:
        """Internal-consistency checks; raises ValueError on violation."""
        for i, step in enumerate(self.steps):
            if step.turn != i + 1:
                raise ValueError(f"step {i} has turn {step.turn}, expected {i + 1}")
            if step.done and i != len(self.steps) - 1:
                raise ValueError("done mid-trajectory")
        if self.steps:
            if not self.aborted and not self.steps[-1].done:
                raise ValueError("last step of a completed trajectory must be done")
            if self.final_reward != self.steps[-1].reward:
                raise ValueError("final_reward disagrees with last step")
        if self.turn_count != len(self.steps):
            raise ValueError("turn_count disagrees with steps")
        if self.success != (self.final_reward > 0):
            raise ValueError("success flag disagrees with final_reward")

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "seed": self.seed,
            "steps": [s.to_json() for s in self.steps],
            "final_reward": self.final_reward,
            "success": self.success,
            "turn_count": self.turn_count,
        }
        if self.aborted:
            out["aborted"] = True
            out["diagnostic"] = self.diagnostic
        return out

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "Trajectory":
        return cls(
            seed=data["seed"],
            steps=[StepRecord.from_json(s) for s in data["steps"]],
            final_reward=data["final_reward"],
            success=data["success"],
            turn_count=data["turn_count"],
            aborted=data.get("aborted", False),
            diagnostic=data.get("diagnostic"),
        )


def trajectory_to_line(trajectory: Trajectory) -> str:
    """Serialize to one compact JSON line with a stable byte layout."""
    return json.dumps(trajectory.to_json(), separators=(",", ":"), sort_keys=False)


def trajectory_from_line(line: str) -> Trajectory:
    return Trajectory.from_json(json.loads(line))


@dataclass
class EpochLog:
    """Trajectories of one epoch, in execution order."""

    epoch: int
    trajectories: list[Trajectory] = field(default_factory=list)

    @property
    def rewards(self) -> list[float]:
        return [t.final_reward for t in self.trajectories]

    @property
    def successes(self) -> int:
        return sum(1 for t in self.trajectories if t.success)

    def all_steps(self) -> Iterable[StepRecord]:
        for trajectory in self.trajectories:
            yield from trajectory.steps


class Environment(abc.ABC):
    """Base class for turn-based episodic environments.

    Lifecycle: ``reset(seed)`` starts an episode and returns the initial
    observation; ``step(action)`` advances one turn.  Stepping a finished
    episode raises :class:`StepAfterDone`.  All randomness comes from the
    reset seed, so identical seeds give identical episodes.
    """

    spec: EnvSpec

    def __init__(self) -> None:
        self._turn = 0
        self._done = False
        self._started = False

    @property
    def turn(self) -> int:
        """Number of committed turns so far."""
        return self._turn

    @property
    def done(self) -> bool:
        return self._done

    @abc.abstractmethod
    def reset(self, seed: int) -> Observation:
        """Begin a fresh episode driven by `seed`."""

    @abc.abstractmethod
    def step(self, action: Action) -> tuple[Observation, float, bool]:
        """Commit one action; returns (observation, reward, done)."""

    @abc.abstractmethod
    def is_well_formed(self, action: Action) -> bool:
        """Shape check only: could step() accept this without raising?"""

    @abc.abstractmethod
    def check_validity(self, action: Action) -> bool:
        """Full validity: shape plus any history-dependent constraints."""

    @abc.abstractmethod
    def explain_invalid(self, action: Action) -> tuple[str, str] | None:
        """None when valid, else a (code, message) pair describing why not."""

    def is_done(self, reward: float) -> bool:
        """Episode-end predicate: success reward earned or budget exhausted."""
        return reward > 0 or self._turn >= self.spec.max_turns

    def _require_active(self) -> None:
        if not self._started:
            raise StepAfterDone("environment was never reset")
        if self._done:
            raise StepAfterDone("episode already finished")
