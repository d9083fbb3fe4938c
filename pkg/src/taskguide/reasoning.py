"""Rule extraction from finished epochs and rule-bank maintenance.

The miner is fully deterministic.  For sequential tasks it tests each bounded
directive template against the winning step of every successful trajectory
and keeps templates with enough distinct-trajectory support.  For cumulative
tasks it checks whether winners stayed inside the feedback-consistent
candidate set throughout and, if so, emits that discipline as a policy rule.

An llm backend can propose rules instead; proposals are parsed into the same
structured form and anything malformed is dropped with a warning, so the bank
never absorbs free text it cannot check.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from typing import Sequence

from .envs.core import EpochLog, Trajectory
from .gateway import CompletionBackend, CompletionRequest
from .profiler import CUMULATIVE, TaskProfile
from .prompts import render_template
from .rules import (
    ActionDirective,
    Condition,
    Predicate,
    Rule,
    RuleBank,
    TEMPLATES,
    directive_matches,
    evaluate_directive,
    make_rule,
)
from .errors import MalformedRule

log = logging.getLogger(__name__)

DEFAULT_SUPPORT_MIN = 3

_RULES_RE = re.compile(r"```rules\s*\n(.*?)```", re.DOTALL)


@dataclass
class ReasoningReport:
    """What one reasoning pass did to the bank."""

    epoch: int
    new_rule_ids: list[str] = field(default_factory=list)
    outcomes_recorded: int = 0
    promoted: list[str] = field(default_factory=list)
    retired: list[str] = field(default_factory=list)

    def summary(self) -> str:
        return (
            f"epoch {self.epoch}: {len(self.new_rule_ids)} new rules, "
            f"{self.outcomes_recorded} outcomes, "
            f"{len(self.promoted)} promoted, {len(self.retired)} retired"
        )


def _probe_rule(template: str) -> Rule:
    # Throwaway carrier so evaluate_directive can run a template.
    return make_rule(
        Condition((Predicate("hint", "present"),)),
        ActionDirective("template", template),
    )


def _mine_sequential(
    trajectories: Sequence[Trajectory],
    max_turns: int,
    support_min: int,
    epoch: int | None,
) -> list[Rule]:
    # directive key -> list of (success turn, trajectory seed)
    matches: dict[tuple[str, object], list[tuple[int, int]]] = {}
    for trajectory in trajectories:
        if not trajectory.success or len(trajectory.steps) < 2:
            continue  # a first-turn win has no prior feedback to learn from
        win = trajectory.steps[-1]
        history = trajectory.steps[:-1]
        observation = win.observation_before
        for template in sorted(TEMPLATES):
            expected = evaluate_directive(_probe_rule(template), observation, history)
            if expected is not None and expected == win.committed_action:
                matches.setdefault(("template", template), []).append(
                    (win.turn, trajectory.seed)
                )
        matches.setdefault(("constant", win.committed_action), []).append(
            (win.turn, trajectory.seed)
        )

    mined = []
    for (kind, value), hits in sorted(matches.items(), key=lambda kv: repr(kv[0])):
        seeds = {seed for _, seed in hits}
        if len(seeds) < support_min:
            continue
        first_turn = min(turn for turn, _ in hits)
        mined.append(
            make_rule(
                Condition(
                    (Predicate("hint", "present"),),
                    window=(max(1, first_turn), max_turns),
                ),
                ActionDirective(kind, value),
                free_text=(
                    f"matched the winning move in {len(seeds)} episodes "
                    f"from turn {first_turn} on"
                ),
                epoch_discovered=epoch,
                source_seeds=sorted(seeds),
            )
        )
    return mined


def _mine_cumulative(
    trajectories: Sequence[Trajectory],
    max_turns: int,
    support_min: int,
    epoch: int | None,
    allowed_words: frozenset[str] | None,
) -> list[Rule]:
    policy = make_rule(
        Condition((Predicate("feedback", "present"),), window=(1, max_turns)),
        ActionDirective("policy", "consistent_candidates"),
    )
    supporters = []
    for trajectory in trajectories:
        if not trajectory.success:
            continue
        followed = all(
            directive_matches(
                policy,
                step.observation_before,
                trajectory.steps[:i],
                step.committed_action,
                allowed_words=allowed_words,
            )
            for i, step in enumerate(trajectory.steps)
        )
        if followed:
            supporters.append(trajectory.seed)
    if len(supporters) < support_min:
        return []
    return [
        make_rule(
            policy.condition,
            policy.directive,
            free_text=(
                f"every winning move stayed in the feedback-consistent "
                f"candidate set in {len(supporters)} episodes"
            ),
            epoch_discovered=epoch,
            source_seeds=sorted(supporters),
        )
    ]


def mine_rules(
    epoch_log: EpochLog,
    profile: TaskProfile,
    max_turns: int,
    support_min: int = DEFAULT_SUPPORT_MIN,
    allowed_words: frozenset[str] | None = None,
) -> list[Rule]:
    """Deterministic rule extraction; see module docstring."""
    if profile.temporal_structure == CUMULATIVE:
        return _mine_cumulative(
            epoch_log.trajectories, max_turns, support_min, epoch_log.epoch, allowed_words
        )
    return _mine_sequential(
        epoch_log.trajectories, max_turns, support_min, epoch_log.epoch
    )


def parse_rule_proposals(text: str, epoch: int | None = None) -> list[Rule]:
    """Parse a fenced rules block into validated rules; drop what fails."""
    found = _RULES_RE.findall(text)
    if not found:
        log.warning("rule extraction response has no rules block")
        return []
    try:
        proposals = json.loads(found[-1])
    except json.JSONDecodeError:
        log.warning("rule extraction response is not valid JSON")
        return []
    if not isinstance(proposals, list):
        log.warning("rule extraction response is not a JSON array")
        return []
    rules = []
    for entry in proposals:
        try:
            condition = Condition(
                predicates=tuple(
                    Predicate(p["field"], p["op"], p.get("value"))
                    for p in entry["condition"]["predicates"]
                ),
                window=(
                    tuple(entry["condition"]["window"])
                    if entry["condition"].get("window")
                    else None
                ),
            )
            directive = ActionDirective(
                entry["directive"]["kind"], entry["directive"].get("value")
            )
            rules.append(
                make_rule(
                    condition,
                    directive,
                    free_text=str(entry.get("free_text", "")),
                    epoch_discovered=epoch,
                )
            )
        except (MalformedRule, KeyError, TypeError) as exc:
            log.warning("dropping unusable rule proposal: %s", exc)
    return rules


def extract_rules(
    epoch_log: EpochLog,
    profile: TaskProfile,
    max_turns: int,
    backend: str = "miner",
    gateway: CompletionBackend | None = None,
    env_description: str = "",
    support_min: int = DEFAULT_SUPPORT_MIN,
    allowed_words: frozenset[str] | None = None,
) -> list[Rule]:
    if backend == "miner":
        return mine_rules(epoch_log, profile, max_turns, support_min, allowed_words)
    if backend != "llm":
        raise ValueError(f"unknown reasoning backend {backend!r}")
    if gateway is None:
        raise ValueError("llm rule extraction needs a completion backend")
    winners = [t for t in epoch_log.trajectories if t.success]
    prompt = render_template(
        "rule_extraction_prompt.txt",
        {
            "ENV_DESCRIPTION": env_description,
            "PROFILE": json.dumps(profile.to_dict()),
            "TRAJECTORIES": "\n".join(
                json.dumps(t.to_json(), separators=(",", ":")) for t in winners
            )
            or "(none)",
        },
    )
    response = gateway.complete(
        CompletionRequest(
            system_text="You extract structured rules from task logs.",
            user_text=prompt,
            purpose="rule_extraction",
            max_output_tokens=1024,
        )
    )
    return parse_rule_proposals(response, epoch=epoch_log.epoch)


def reasoning_update(
    bank: RuleBank,
    epoch_log: EpochLog,
    profile: TaskProfile,
    max_turns: int,
    backend: str = "miner",
    gateway: CompletionBackend | None = None,
    env_description: str = "",
    support_min: int = DEFAULT_SUPPORT_MIN,
    allowed_words: frozenset[str] | None = None,
) -> ReasoningReport:
    """One end-of-epoch pass: extract rules, then fold in outcomes.

    Rules applied during the epoch are credited with their trajectory's
    success or failure; promotions and retirements fall out of the bank's
    thresholds.  The bank is the single mutable object here; trajectories
    are never modified.
    """
    statuses_before = {rule.id: rule.status for rule in bank.all_rules()}
    report = ReasoningReport(epoch=epoch_log.epoch)

    for rule in extract_rules(
        epoch_log,
        profile,
        max_turns,
        backend=backend,
        gateway=gateway,
        env_description=env_description,
        support_min=support_min,
        allowed_words=allowed_words,
    ):
        if rule.id not in bank:
            report.new_rule_ids.append(rule.id)
        bank.register(rule)

    for trajectory in epoch_log.trajectories:
        for step in trajectory.steps:
            for rule_id_ in step.applied_rule_ids:
                bank.record_outcome(rule_id_, trajectory.success)
                report.outcomes_recorded += 1

    for rule in bank.all_rules():
        before = statuses_before.get(rule.id, "candidate")
        if before != "verified" and rule.status == "verified":
            report.promoted.append(rule.id)
        elif before != "retired" and rule.status == "retired":
            report.retired.append(rule.id)
    return report
