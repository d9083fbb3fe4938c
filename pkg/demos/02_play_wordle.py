"""
Word-guessing environment: two-pass scoring and hard-mode validity
==================================================================
"""

from taskguide.envs.wordle import WordleEnv, load_word_list, score_guess

# Scoring pass 1 marks exact positions and consumes those secret letters;
# pass 2 marks misplaced letters while unconsumed copies remain.  Duplicate
# letters are where naive scorers go wrong:
for secret, guess in [("crane", "caret"), ("abbey", "babes"), ("crane", "eerie")]:
    marks = score_guess(secret, guess)
    print(f"secret {secret!r}, guess {guess!r}:")
    for letter, mark in zip(guess, marks):
        print(f"    {letter} {mark}")

# The environment enforces membership in the allowed list, and (in hard
# mode) consistency with every mark it has shown so far.
words = load_word_list()
print(f"\nword list: {len(words.answers)} answers, {len(words.allowed)} allowed guesses")

env = WordleEnv(words=words, hard_validity=True)
obs = env.reset(seed=11)
print("fresh observation:", obs)

obs, reward, done = env.step("crane")
print("\nafter 'crane':")
for row in obs["feedback"]:
    print("   ", row["guess"], row["marks"])

# check_validity is advisory; step() itself only rejects malformed input.
# A guided agent consults it before committing anything.
for probe in ("crane", "zzzzz", "slate"):
    print(f"valid next guess {probe!r}?", env.check_validity(probe), end="")
    why = env.explain_invalid(probe)
    print(f"  ({why[0]}: {why[1]})" if why else "")

# Finish the episode with whatever the feedback still allows.
while not done:
    guess = next(w for w in words.answers if env.check_validity(w))
    obs, reward, done = env.step(guess)
    print(f"played {guess!r}, reward {reward}")

print("turns used:", obs["turn"])
