"""Letter-constraint tracking for word-feedback games.

Feedback marks accumulate into a :class:`ConstraintState` with four parts:

* ``fixed`` - positions known to hold a specific letter (correct marks);
* ``position_exclusions`` - letters known not to sit at a position.
  Misplaced marks always contribute one; an absent mark contributes one
  too when the same guess confirmed the letter elsewhere (had the secret
  held the letter at that position, the mark would have been correct);
* ``min_count`` - per-letter lower bounds (correct + misplaced occurrences
  within a single guess);
* ``max_count`` - per-letter upper bounds (set when a guess shows more
  copies of a letter than the secret holds); absence means unbounded,
  0 means the letter is ruled out entirely.

States are immutable values: ``update`` returns a new state, and updates only
ever tighten.  Word positions are 0-based throughout.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import ContradictoryFeedback, EmptyCandidateSet
from .prng import SplitMix64

CORRECT = "correct"
MISPLACED = "misplaced"
ABSENT = "absent"
MARKS = frozenset({CORRECT, MISPLACED, ABSENT})

WORD_LENGTH = 5


@dataclass(frozen=True)
class ConstraintState:
    """Immutable snapshot of everything feedback has revealed so far."""

    fixed: Mapping[int, str] = field(default_factory=dict)
    position_exclusions: Mapping[int, frozenset[str]] = field(default_factory=dict)
    min_count: Mapping[str, int] = field(default_factory=dict)
    max_count: Mapping[str, int] = field(default_factory=dict)

    @classmethod
    def empty(cls) -> "ConstraintState":
        return cls()

    def as_dict(self) -> dict:
        """JSON-compatible rendering for diagnostics and demos."""
        return {
            "fixed": {str(i): c for i, c in sorted(self.fixed.items())},
            "position_exclusions": {
                str(i): sorted(s) for i, s in sorted(self.position_exclusions.items())
            },
            "min_count": dict(sorted(self.min_count.items())),
            "max_count": dict(sorted(self.max_count.items())),
        }


def _check_invariants(state: ConstraintState) -> None:
    for pos, letter in state.fixed.items():
        if letter in state.position_exclusions.get(pos, frozenset()):
            raise ContradictoryFeedback(
                f"position {pos} fixed to {letter!r} but also excludes it"
            )
    for letter, low in state.min_count.items():
        high = state.max_count.get(letter)
        if high is not None and low > high:
            raise ContradictoryFeedback(
                f"letter {letter!r} needs at least {low} but at most {high}"
            )
    if sum(state.min_count.values()) > WORD_LENGTH:
        raise ContradictoryFeedback("minimum letter counts exceed word length")


def update(
    state: ConstraintState, guess: str, marks: Sequence[str]
) -> ConstraintState:
    """Fold one (guess, marks) round into the state.

    Raises ContradictoryFeedback when the new marks cannot coexist with what
    is already known (impossible against a fixed secret).  Idempotent:
    folding the same round twice changes nothing further.
    """
    if len(guess) != len(marks) or len(guess) != WORD_LENGTH:
        raise ValueError("guess and marks must both have the word length")
    if any(m not in MARKS for m in marks):
        raise ValueError(f"unknown mark in {marks!r}")

    fixed = dict(state.fixed)
    exclusions = {pos: set(s) for pos, s in state.position_exclusions.items()}
    min_count = dict(state.min_count)
    max_count = dict(state.max_count)

    # Letters confirmed present by this guess (correct or misplaced),
    # counted with multiplicity.  Absent marks cap a letter at exactly
    # this confirmed count.
    confirmed = Counter(
        letter
        for letter, mark in zip(guess, marks)
        if mark in (CORRECT, MISPLACED)
    )

    for pos, (letter, mark) in enumerate(zip(guess, marks)):
        if mark == CORRECT:
            existing = fixed.get(pos)
            if existing is not None and existing != letter:
                raise ContradictoryFeedback(
                    f"position {pos} marked correct for {letter!r} "
                    f"but already fixed to {existing!r}"
                )
            fixed[pos] = letter
        elif mark == MISPLACED:
            exclusions.setdefault(pos, set()).add(letter)
        else:  # ABSENT: cap the letter's count at what this guess confirmed
            cap = confirmed[letter]
            prior = max_count.get(letter)
            max_count[letter] = cap if prior is None else min(prior, cap)
            if cap > 0:
                # The letter is in the word, just not here: a copy at this
                # position would have scored correct.  (cap == 0 already
                # bans the letter everywhere.)
                exclusions.setdefault(pos, set()).add(letter)

    for letter, count in confirmed.items():
        min_count[letter] = max(min_count.get(letter, 0), count)

    new_state = ConstraintState(
        fixed=fixed,
        position_exclusions={p: frozenset(s) for p, s in exclusions.items()},
        min_count=min_count,
        max_count=max_count,
    )
    _check_invariants(new_state)
    return new_state


def state_from_history(
    feedback: Iterable[tuple[str, Sequence[str]]]
) -> ConstraintState:
    """Fold a whole episode's (guess, marks) rounds into one state."""
    state = ConstraintState.empty()
    for guess, marks in feedback:
        state = update(state, guess, marks)
    return state


def is_consistent(state: ConstraintState, word: str) -> bool:
    """True iff `word` satisfies every accumulated constraint."""
    if len(word) != WORD_LENGTH:
        return False
    for pos, letter in state.fixed.items():
        if word[pos] != letter:
            return False
    for pos, banned in state.position_exclusions.items():
        if word[pos] in banned:
            return False
    counts = Counter(word)
    for letter, low in state.min_count.items():
        if counts[letter] < low:
            return False
    for letter, high in state.max_count.items():
        if counts[letter] > high:
            return False
    return True


def violations(state: ConstraintState, word: str) -> list[tuple[str, str]]:
    """All (code, message) pairs describing how `word` breaks the state."""
    found: list[tuple[str, str]] = []
    if len(word) != WORD_LENGTH:
        return [("length", f"word must have {WORD_LENGTH} letters")]
    for pos, letter in sorted(state.fixed.items()):
        if word[pos] != letter:
            found.append(
                ("fixed_position", f"position {pos + 1} must be {letter!r}")
            )
    for pos, banned in sorted(state.position_exclusions.items()):
        if word[pos] in banned:
            found.append(
                (
                    "position_excluded",
                    f"{word[pos]!r} cannot sit at position {pos + 1}",
                )
            )
    counts = Counter(word)
    for letter, low in sorted(state.min_count.items()):
        if counts[letter] < low:
            found.append(
                ("min_count", f"needs at least {low} of {letter!r}")
            )
    for letter, high in sorted(state.max_count.items()):
        if counts[letter] > high:
            found.append(
                ("max_count", f"at most {high} of {letter!r} allowed")
            )
    return found


def enumerate_candidates(
    state: ConstraintState,
    words: Sequence[str],
    order: str = "list",
    rng: SplitMix64 | None = None,
) -> Iterator[str]:
    """Lazily yield words consistent with `state`.

    `order` is "list" (given order, the default), "lex" (sorted), or
    "seeded_shuffle" (deterministic shuffle driven by `rng`).  Raises
    EmptyCandidateSet at exhaustion if nothing was ever yielded.
    """
    if order == "list":
        pool: Sequence[str] = words
    elif order == "lex":
        pool = sorted(words)
    elif order == "seeded_shuffle":
        if rng is None:
            raise ValueError("seeded_shuffle order requires an rng")
        shuffled = list(words)
        rng.shuffle(shuffled)
        pool = shuffled
    else:
        raise ValueError(f"unknown enumeration order {order!r}")

    yielded = False
    for word in pool:
        if is_consistent(state, word):
            yielded = True
            yield word
    if not yielded:
        raise EmptyCandidateSet("no word satisfies the accumulated constraints")
