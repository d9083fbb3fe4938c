"""Validity gate, constraint-compliant fallback, and step commitment.

The gate sits between a proposed action and the environment: valid proposals
pass through untouched; invalid ones are replaced by a fallback action that
is guaranteed valid, and the step record keeps both the original proposal and
the reason it was rejected.  The episode therefore never stalls on a bad
proposal, and the log preserves enough to measure how often rescue happened.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

from . import constraints
from .envs.core import Action, Environment, Observation, StepRecord
from .envs.guess_number import (
    HIGH,
    LOW,
    feasible_interval,
    interval_midpoint,
)
from .errors import EmptyCandidateSet, NoValidAction
from .gateway import ParseFailure
from .prng import SplitMix64
from .profiler import TaskProfile

STRATEGY_DIRECT = "direct"
STRATEGY_ENUMERATION = "enumeration"


@dataclass(frozen=True)
class GateResult:
    accepted: bool
    action: Action | None
    violation_code: str | None = None
    violation_message: str | None = None

    @property
    def violation(self) -> str | None:
        if self.violation_code is None:
            return None
        return f"{self.violation_code}: {self.violation_message}"


def gate(proposed: Any, env: Environment) -> GateResult:
    """Check a proposal against the environment's validity predicate."""
    if proposed is None or isinstance(proposed, ParseFailure):
        reason = proposed.reason if isinstance(proposed, ParseFailure) else "no action"
        return GateResult(False, None, "parse_failure", reason)
    explanation = env.explain_invalid(proposed)
    if explanation is None:
        return GateResult(True, proposed)
    code, message = explanation
    return GateResult(False, None, code, message)


def fallback_generate(
    env: Environment,
    steps: Sequence[StepRecord],
    observation: Observation,
    profile: TaskProfile | None = None,
    rng: SplitMix64 | None = None,
    order: str = "list",
    pool: Sequence[str] | None = None,
) -> Action:
    """Produce a valid action without consulting the model.

    Strategy comes from the task profile when one exists, otherwise from the
    environment's shape: enumeration when validity depends on history, direct
    construction when it does not.

    * enumeration: rebuild the constraint state from the observed feedback
      and take the first consistent word (enumeration order configurable);
    * direct: midpoint of the feasible interval when exact hints exist, else
      a mid-range probe.

    Raises NoValidAction only if the environment rejects everything, which
    honest feedback cannot cause.
    """
    strategy = (
        profile.generation_strategy
        if profile is not None
        else (
            STRATEGY_ENUMERATION
            if env.spec.validity_uses_history
            else STRATEGY_DIRECT
        )
    )
    if strategy == STRATEGY_ENUMERATION:
        words = pool if pool is not None else getattr(env, "words", None)
        if words is None:
            raise NoValidAction("enumeration fallback needs a word pool")
        candidates = words if pool is not None else words.answers
        feedback = observation.get("feedback", [])
        state = constraints.state_from_history(
            (entry["guess"], entry["marks"]) for entry in feedback
        )
        try:
            for word in constraints.enumerate_candidates(
                state, candidates, order, rng
            ):
                if env.check_validity(word):
                    return word
        except EmptyCandidateSet:
            pass
        raise NoValidAction("no consistent word satisfies the environment")

    interval = feasible_interval(steps, observation)
    action = interval_midpoint(interval) if interval else (LOW + HIGH) // 2
    action = max(LOW, min(HIGH, action))
    if not env.check_validity(action):
        raise NoValidAction(f"constructed action {action!r} rejected")
    return action


def commit(
    env: Environment,
    action: Action,
    observation_before: Observation,
    proposed_action: Any,
    valid_on_first_try: bool,
    fallback_used: bool,
    applied_rule_ids: Sequence[str],
    violation: str | None = None,
) -> tuple[Observation, float, bool, StepRecord]:
    """Step the environment and capture the full step record."""
    observation, reward, done = env.step(action)
    record = StepRecord(
        turn=env.turn,
        observation_before=observation_before,
        proposed_action=proposed_action,
        committed_action=action,
        valid_on_first_try=valid_on_first_try,
        fallback_used=fallback_used,
        applied_rule_ids=list(applied_rule_ids),
        reward=reward,
        done=done,
        violation=violation,
    )
    return observation, reward, done, record
