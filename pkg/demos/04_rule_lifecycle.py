"""
Rule bank: mining action patterns from winners, then testing them
=================================================================

After each epoch, winning trajectories are mined for action patterns
(arithmetic templates over the observation, repeated constants, or a
candidate-enumeration policy).  Mined rules start as candidates; live
applications promote them to verified or retire them.
"""

from taskguide.agent import describe_rule
from taskguide.envs.core import EpochLog, StepRecord, Trajectory
from taskguide.profiler import TaskProfile
from taskguide.reasoning import mine_rules, reasoning_update
from taskguide.rules import RuleBank


def step(turn, obs, action, reward=0.0, done=False, applied=()):
    return StepRecord(
        turn=turn,
        observation_before=obs,
        proposed_action=action,
        committed_action=action,
        valid_on_first_try=True,
        fallback_used=False,
        applied_rule_ids=list(applied),
        reward=reward,
        done=done,
    )


def winner(seed, hint):
    # guess 5000, read the hint, then win with 5000 + hint
    return Trajectory.from_steps(seed, [
        step(1, {"turn": 0, "turns_remaining": 15}, 5000),
        step(2, {"turn": 1, "hint": hint, "turns_remaining": 14},
             5000 + hint, reward=50.0, done=True),
    ])


profile = TaskProfile("sequential", "light", "direct", 15)
epoch = EpochLog(epoch=1, trajectories=[winner(s, h) for s, h in
                                        [(10, 700), (11, 431), (12, 88)]])

# Three distinct-seed winners all played previous-guess-plus-hint, which
# meets the default support threshold.
mined = mine_rules(epoch, profile, max_turns=15)
for rule in mined:
    print("mined:", describe_rule(rule))
    print("  id:", rule.id)

# Feed outcomes through the bank: five successful applications promote,
# a crash in the success rate retires.
bank = RuleBank()
rule_id = bank.register(mined[0])

for success in [True, True, True, True, True, False]:
    rule = bank.record_outcome(rule_id, success)
print(f"\nafter 5 wins + 1 loss: {rule.status}, "
      f"rate {rule.success_rate:.2f} over {rule.applications} applications")
print("described:", describe_rule(rule))

# Status changes are sticky: verified rules keep their badge even if the
# rate later dips, so one noisy epoch cannot erase a season of evidence.
for _ in range(4):
    rule = bank.record_outcome(rule_id, False)
print(f"after 4 more losses: {rule.status}, rate {rule.success_rate:.2f}")

# reasoning_update is the end-of-epoch wrapper: mine, register, credit
# every applied rule with its trajectory's outcome, report the diff.
fresh = RuleBank()
report = reasoning_update(fresh, epoch, profile, max_turns=15)
print("\nepoch summary:", report.summary())
print("bank now holds", len(fresh), "rule(s):",
      fresh.counts_by_status())
