"""Number guessing with a noisy distance hint that decays each turn.

The secret is an integer in [0, 10000].  After a wrong guess on turn t the
agent receives ``hint = max(0, round(d + u))`` where d is the true absolute
distance and u is uniform noise in [-m, +m] with ``m = 1000 * 0.2**t``.
The noise magnitude drops below 0.5 from turn 5 onward, so late hints are
exact distances.  A correct guess on turn t scores ``100 / t``.
"""

from __future__ import annotations

import math
from typing import Sequence

from ..errors import MalformedAction
from ..prng import SplitMix64
from .core import Action, Environment, EnvSpec, FieldSpec, Observation, StepRecord

LOW = 0
HIGH = 10000
MAX_TURNS = 15
NOISE_BASE = 1000.0
NOISE_DECAY = 0.2

GUESS_NUMBER_SPEC = EnvSpec(
    name="gmn",
    goal=(
        f"Guess the secret integer between {LOW} and {HIGH} (inclusive) "
        "in as few turns as possible."
    ),
    observation_fields=(
        FieldSpec("turn", "integer", "turns committed so far"),
        FieldSpec(
            "hint",
            "integer",
            "noisy absolute distance between your last guess and the secret; "
            "0 means your last guess was exactly right; absent before the "
            "first guess; noise shrinks sharply every turn and is gone by "
            "turn 5",
        ),
        FieldSpec("turns_remaining", "integer", "turns left in the budget"),
    ),
    action_fields=(
        FieldSpec("guess", "integer", f"an integer in [{LOW}, {HIGH}]"),
    ),
    reward_description=(
        "100 / t for a correct guess on turn t; 0 if the budget runs out."
    ),
    max_turns=MAX_TURNS,
    validity_uses_history=False,
)


def noise_magnitude(turn: int) -> float:
    """Half-width of the uniform hint noise on turn `turn` (1-based)."""
    return NOISE_BASE * NOISE_DECAY**turn


def round_half_away(x: float) -> int:
    """Round to nearest integer with ties away from zero (not banker's)."""
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


class GuessNumberEnv(Environment):
    """See module docstring.  All randomness derives from the reset seed."""

    spec = GUESS_NUMBER_SPEC

    def __init__(self) -> None:
        super().__init__()
        self._secret = 0
        self._rng: SplitMix64 | None = None

    @property
    def secret(self) -> int:
        """The hidden number; exposed for replay verification and audits."""
        return self._secret

    def reset(self, seed: int) -> Observation:
        self._rng = SplitMix64(seed)
        self._secret = self._rng.randint(LOW, HIGH)
        self._turn = 0
        self._done = False
        self._started = True
        return {"turn": 0, "turns_remaining": MAX_TURNS}

    def is_well_formed(self, action: Action) -> bool:
        return (
            isinstance(action, int)
            and not isinstance(action, bool)
            and LOW <= action <= HIGH
        )

    def check_validity(self, action: Action) -> bool:
        return self.is_well_formed(action)

    def explain_invalid(self, action: Action) -> tuple[str, str] | None:
        if isinstance(action, int) and not isinstance(action, bool):
            if LOW <= action <= HIGH:
                return None
            return ("out_of_range", f"guess {action} outside [{LOW}, {HIGH}]")
        return ("malformed_action", f"expected an integer, got {action!r}")

    def step(self, action: Action) -> tuple[Observation, float, bool]:
        self._require_active()
        if not self.is_well_formed(action):
            code, message = self.explain_invalid(action)  # type: ignore[misc]
            raise MalformedAction(message)
        assert self._rng is not None
        self._turn += 1
        t = self._turn
        if action == self._secret:
            reward = 100.0 / t
            hint = 0  # exact by definition; no noise draw on success
        else:
            reward = 0.0
            distance = abs(action - self._secret)
            m = noise_magnitude(t)
            u = self._rng.uniform(-m, m)
            hint = max(0, round_half_away(distance + u))
        self._done = self.is_done(reward)
        observation: Observation = {
            "turn": t,
            "hint": hint,
            "turns_remaining": MAX_TURNS - t,
        }
        return observation, reward, self._done


def exact_hint_pairs(
    steps: Sequence[StepRecord], current: Observation
) -> list[tuple[int, int]]:
    """(guess, exact distance) pairs from turns whose hint noise is below 0.5.

    The hint produced by step i lives in step i+1's observation_before, or in
    `current` for the newest step.
    """
    pairs: list[tuple[int, int]] = []
    for i, step in enumerate(steps):
        after = steps[i + 1].observation_before if i + 1 < len(steps) else current
        hint = after.get("hint")
        if hint is None or step.turn < 5:
            continue
        if noise_magnitude(step.turn) < 0.5 and isinstance(step.committed_action, int):
            pairs.append((step.committed_action, hint))
    return pairs


def feasible_interval(
    steps: Sequence[StepRecord], current: Observation
) -> tuple[int, int] | None:
    """Intersection of [g-d, g+d] bands from exact hints, clipped to range.

    Returns None when no exact hint exists yet.  With honest feedback the
    interval always contains the secret, hence never comes back empty.
    """
    lo, hi = LOW, HIGH
    seen = False
    for guess, distance in exact_hint_pairs(steps, current):
        seen = True
        lo = max(lo, guess - distance)
        hi = min(hi, guess + distance)
    if not seen:
        return None
    return (lo, hi) if lo <= hi else None


def interval_midpoint(interval: tuple[int, int]) -> int:
    lo, hi = interval
    return (lo + hi) // 2
