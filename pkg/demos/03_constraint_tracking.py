"""
Constraint state: folding feedback into an exact candidate filter
=================================================================

Each (guess, marks) round tightens four constraint families: fixed
positions, per-position letter exclusions, and per-letter count bounds.
A word is consistent with the state exactly when replaying every guess
against it would reproduce the recorded marks.
"""

import json

from taskguide import constraints
from taskguide.envs.wordle import load_word_list, score_guess

words = load_word_list()
answers = words.answers

secret = "armed"
state = constraints.ConstraintState.empty()
print(f"candidates before any guess: {len(answers)}")

for guess in ("aleye", "strap", "amend"):
    marks = score_guess(secret, guess)
    state = constraints.update(state, guess, marks)
    remaining = sum(1 for w in answers if constraints.is_consistent(state, w))
    print(f"\nguess {guess!r} -> {marks}")
    print(f"  candidates remaining: {remaining}")

print("\nfinal state:")
print(json.dumps(state.as_dict(), indent=2))

# Note the exclusion at position 5: 'aleye' has two e's but 'armed' only
# one, so the second 'e' came back absent.  That both caps the e-count at
# one and rules position 5 out; a secret with 'e' there would have marked
# it correct.

candidates = list(constraints.enumerate_candidates(state, answers, order="list"))
print("\nsurviving candidates:", candidates)

# The state-based filter agrees with brute-force replay of the feedback.
history = [(g, score_guess(secret, g)) for g in ("aleye", "strap", "amend")]
replayed = [
    w for w in answers
    if all(score_guess(w, g) == m for g, m in history)
]
print("replay filter agrees:", candidates == replayed)

# Enumeration is lazy, so the fallback's "first valid option" strategy
# never scans past what it needs.
first = next(constraints.enumerate_candidates(state, answers, order="lex"))
print("first candidate in alphabetical order:", first)
