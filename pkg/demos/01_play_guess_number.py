"""
Number-guessing environment: noisy hints that sharpen each turn
===============================================================

A secret integer in [0, 10000] is drawn from the episode seed.  Every guess
returns a hint: the true distance plus uniform noise whose magnitude decays
geometrically, so from turn 5 onward the hint is the exact distance.
"""

from taskguide.envs.guess_number import GuessNumberEnv, noise_magnitude

env = GuessNumberEnv()
obs = env.reset(seed=3)
print("fresh observation:", obs)  # no hint before the first guess

# The noise envelope is fixed by the turn number alone.
print("\nnoise magnitude by turn:")
for turn in range(1, 8):
    print(f"  turn {turn}: +/- {noise_magnitude(turn):.2f}")

# Repeat one guess and watch the hint settle onto the true distance.
guess = 5000
for _ in range(5):
    obs, reward, done = env.step(guess)
    print(f"guessed {guess} -> hint {obs['hint']} (turn {obs['turn']})")

# Turn-5 noise is +/- 0.32, below the rounding threshold, so that last hint
# is the exact distance.  The secret is one of two points.
lo = max(0, guess - obs["hint"])
hi = min(10000, guess + obs["hint"])
print(f"\nexact distance {obs['hint']}: secret is {lo} or {hi}")

obs, reward, done = env.step(lo)
if not done:
    obs, reward, done = env.step(hi)

# Reward is 100 / turns-taken, so speed is everything.
print(f"solved: {done}, reward {reward:.4f} after {obs['turn']} turns")
