"""Five-letter word guessing with per-position feedback.

Scoring is the classic two-pass procedure that handles repeated letters
correctly: exact position matches are marked first and consume their secret
letter; remaining guess letters are marked misplaced only while unconsumed
copies remain, otherwise absent.  Reward is a flat 100 on success within the
six-turn budget.

With ``hard_validity`` on, a guess is valid only if it is in the allowed list
*and* consistent with all feedback received so far (hard mode).  With it off,
any allowed-list word is valid.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .. import constraints
from ..constraints import ABSENT, CORRECT, MISPLACED, WORD_LENGTH
from ..errors import LengthMismatch, MalformedAction
from ..prng import SplitMix64
from .core import Action, Environment, EnvSpec, FieldSpec, Observation

MAX_TURNS = 6
SUCCESS_REWARD = 100.0


def score_guess(secret: str, guess: str) -> tuple[str, ...]:
    """Mark each guess position as correct, misplaced, or absent.

    Pass 1 marks exact matches and consumes those secret letters; pass 2
    marks a remaining letter misplaced only while unconsumed copies of it
    survive in the secret, else absent.  Marks for a repeated guess letter
    never exceed its multiplicity in the secret.
    """
    if len(secret) != len(guess):
        raise LengthMismatch(
            f"secret has {len(secret)} letters, guess has {len(guess)}"
        )
    n = len(secret)
    marks: list[str | None] = [None] * n
    remaining: dict[str, int] = {}
    for i in range(n):
        if guess[i] == secret[i]:
            marks[i] = CORRECT
        else:
            remaining[secret[i]] = remaining.get(secret[i], 0) + 1
    for i in range(n):
        if marks[i] is not None:
            continue
        letter = guess[i]
        if remaining.get(letter, 0) > 0:
            marks[i] = MISPLACED
            remaining[letter] -= 1
        else:
            marks[i] = ABSENT
    return tuple(m for m in marks if m is not None)


class WordList:
    """Answer pool and allowed-guess list, with fast membership."""

    def __init__(self, answers: list[str], allowed: list[str]) -> None:
        self.answers: tuple[str, ...] = tuple(answers)
        self.allowed: tuple[str, ...] = tuple(allowed)
        self.allowed_set: frozenset[str] = frozenset(allowed)
        if not self.answers:
            raise ValueError("answer list is empty")
        missing = [w for w in self.answers if w not in self.allowed_set]
        if missing:
            raise ValueError(
                f"{len(missing)} answers missing from allowed list "
                f"(first: {missing[0]!r})"
            )
        bad = [w for w in self.allowed if len(w) != WORD_LENGTH or not w.isalpha()]
        if bad:
            raise ValueError(f"malformed word in list: {bad[0]!r}")

    def __contains__(self, word: str) -> bool:
        return word in self.allowed_set


def _read_words(path: Path) -> list[str]:
    words = [line.strip().lower() for line in path.read_text().splitlines()]
    return [w for w in words if w]


def load_word_list(
    answers_path: str | Path | None = None,
    allowed_path: str | Path | None = None,
) -> WordList:
    """Load word lists from files, defaulting to the packaged lists."""
    data = resources.files("taskguide") / "data"
    answers_file = (
        Path(answers_path) if answers_path else Path(str(data / "wordle_answers.txt"))
    )
    allowed_file = (
        Path(allowed_path) if allowed_path else Path(str(data / "wordle_allowed.txt"))
    )
    answers = _read_words(answers_file)
    allowed = _read_words(allowed_file)
    return WordList(answers, allowed)


def make_spec(hard_validity: bool) -> EnvSpec:
    return EnvSpec(
        name="wordle",
        goal=(
            "Guess the secret five-letter word. Each guess is scored "
            "letter by letter."
        ),
        observation_fields=(
            FieldSpec("turn", "integer", "turns committed so far"),
            FieldSpec(
                "feedback",
                "list",
                "all past guesses, each with per-position marks: 'correct' "
                "(right letter, right spot), 'misplaced' (in the word, wrong "
                "spot), 'absent' (no unaccounted copies in the word)",
            ),
            FieldSpec("turns_remaining", "integer", "turns left in the budget"),
        ),
        action_fields=(
            FieldSpec(
                "guess",
                "word",
                "a lowercase five-letter word from the allowed list"
                + (
                    " that is consistent with all feedback so far"
                    if hard_validity
                    else ""
                ),
            ),
        ),
        reward_description="100 for guessing the word within 6 turns; 0 otherwise.",
        max_turns=MAX_TURNS,
        validity_uses_history=hard_validity,
    )


class WordleEnv(Environment):
    """See module docstring."""

    def __init__(self, words: WordList | None = None, hard_validity: bool = True):
        super().__init__()
        self.words = words if words is not None else load_word_list()
        self.hard_validity = hard_validity
        self.spec = make_spec(hard_validity)
        self._secret = ""
        self._feedback: list[tuple[str, tuple[str, ...]]] = []

    @property
    def secret(self) -> str:
        """The hidden word; exposed for replay verification and audits."""
        return self._secret

    @property
    def feedback(self) -> list[tuple[str, tuple[str, ...]]]:
        return list(self._feedback)

    def reset(self, seed: int) -> Observation:
        rng = SplitMix64(seed)
        self._secret = self.words.answers[rng.randint(0, len(self.words.answers) - 1)]
        self._feedback = []
        self._turn = 0
        self._done = False
        self._started = True
        return self._observation()

    def _observation(self) -> Observation:
        return {
            "turn": self._turn,
            "feedback": [
                {"guess": g, "marks": list(m)} for g, m in self._feedback
            ],
            "turns_remaining": MAX_TURNS - self._turn,
        }

    def is_well_formed(self, action: Action) -> bool:
        return (
            isinstance(action, str)
            and len(action) == WORD_LENGTH
            and action.isalpha()
            and action == action.lower()
        )

    def check_validity(self, action: Action) -> bool:
        return self.explain_invalid(action) is None

    def explain_invalid(self, action: Action) -> tuple[str, str] | None:
        if not self.is_well_formed(action):
            return (
                "malformed_action",
                f"expected a lowercase {WORD_LENGTH}-letter word, got {action!r}",
            )
        if action not in self.words:
            return ("not_in_word_list", f"{action!r} is not an allowed guess")
        if self.hard_validity and self._feedback:
            state = constraints.state_from_history(self._feedback)
            found = constraints.violations(state, action)
            if found:
                code, message = found[0]
                return (code, message)
        return None

    def step(self, action: Action) -> tuple[Observation, float, bool]:
        self._require_active()
        if not self.is_well_formed(action):
            _, message = self.explain_invalid(action)  # type: ignore[misc]
            raise MalformedAction(message)
        marks = score_guess(self._secret, action)
        self._turn += 1
        self._feedback.append((action, marks))
        reward = SUCCESS_REWARD if action == self._secret else 0.0
        self._done = self.is_done(reward)
        return self._observation(), reward, self._done
