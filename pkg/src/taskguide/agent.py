"""Agent variants and the epoch loop.

Three variants share one code path, differing only in what the prompt carries
and whether the gate runs:

* ``baseline``       - prompt holds task description and episode history;
* ``baseline_icl``   - adds a few past successful episodes to the prompt;
* ``guided``         - adds applicable rules to the prompt, checks every
  proposal against the validity predicate, and swaps rejected proposals for
  a constraint-compliant fallback action.

The experiment driver runs epochs of trajectories, mines rules from each
finished epoch (guided only), and keeps every byte it writes deterministic in
the master seed: trajectory seeds, the fallback stream, and example sampling
are all derived from it through fixed-tag splitmix streams.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Callable, Sequence

from .envs.core import (
    Environment,
    EnvSpec,
    EpochLog,
    Observation,
    StepRecord,
    Trajectory,
)
from .errors import NoValidAction, TransportExhausted
from .gateway import (
    CompletionBackend,
    CompletionRequest,
    ParseFailure,
    format_state_block,
    make_backend,
    parse_action,
)
from .generation import commit, fallback_generate, gate
from .metrics import render_report_csv, report_rows
from .profiler import Profiler, TaskProfile
from .prng import SplitMix64, derive_seed
from .prompts import render_template
from .reasoning import reasoning_update
from .rules import Rule, RuleBank, directive_matches
from .runs import RunConfig, RunDirectory, load_words, make_environment
from .envs.wordle import WordList

# Stream tags keep derived seeds disjoint from trajectory seeds, whose first
# derivation part is always a small epoch number.
FALLBACK_STREAM = 0xFA11BACC0DE
ICL_STREAM = 0x1C1C0DE5EED

_ANSWER_HINTS = {"integer": "<one integer>", "word": "<one lowercase word>"}


def trajectory_seed(master_seed: int, epoch: int, index: int) -> int:
    """Seed of trajectory `index` (1-based) in epoch `epoch` (1-based)."""
    return derive_seed(master_seed, epoch, index)


# -- prompt composition -----------------------------------------------------


def _transition_summary(observation: Observation) -> str:
    """One short phrase describing what a step's resulting observation said."""
    if "hint" in observation:
        return f"hint {observation['hint']}"
    feedback = observation.get("feedback") or []
    if feedback:
        marks = feedback[-1]["marks"]
        return "marks " + "".join(m[0] for m in marks)
    return "no signal"


def _observations_after(
    steps: Sequence[StepRecord], current: Observation
) -> list[Observation]:
    return [
        steps[i + 1].observation_before if i + 1 < len(steps) else current
        for i in range(len(steps))
    ]


def describe_trajectory(trajectory: Trajectory) -> str:
    """Compact one-line episode rendering for in-context examples."""
    parts = []
    steps = trajectory.steps
    for i, step in enumerate(steps):
        if i + 1 < len(steps):
            outcome = _transition_summary(steps[i + 1].observation_before)
        elif step.reward > 0:
            outcome = "success"
        else:
            outcome = "episode over"
        parts.append(f"turn {step.turn}: {step.committed_action} ({outcome})")
    return (
        f"reward {trajectory.final_reward:g} in {trajectory.turn_count} turns: "
        + "; ".join(parts)
    )


def _condition_text(rule: Rule) -> str:
    clauses = []
    for p in rule.condition.predicates:
        if p.op == "present":
            clauses.append(f"{p.field} is present")
        elif p.op == "absent":
            clauses.append(f"{p.field} is absent")
        else:
            clauses.append(f"{p.field} {p.op} {p.value}")
    if rule.condition.window:
        low, high = rule.condition.window
        clauses.append(f"turn is {low}-{high}")
    return " and ".join(clauses)


def _directive_text(rule: Rule) -> str:
    kind, value = rule.directive.kind, rule.directive.value
    if kind == "constant":
        return f"play {value}"
    if kind == "policy":
        return "guess a word consistent with all feedback so far"
    return {
        "previous_guess_plus_hint": "play your previous guess plus the hint",
        "previous_guess_minus_hint": "play your previous guess minus the hint",
        "interval_midpoint": "play the midpoint of the feasible interval",
    }[value]


def describe_rule(rule: Rule) -> str:
    line = f"when {_condition_text(rule)}: {_directive_text(rule)}"
    if rule.applications:
        line += f" [{rule.status}, won {rule.successes}/{rule.applications}]"
    else:
        line += f" [{rule.status}, untested]"
    return line


def compose_prompt(
    spec: EnvSpec,
    steps: Sequence[StepRecord],
    observation: Observation,
    rules: Sequence[Rule] = (),
    icl_examples: Sequence[Trajectory] = (),
) -> tuple[str, str]:
    """Build (system_text, user_text) for one action request.

    The user text always embeds a machine-readable state block with the
    current observation and full episode history; scripted backends read it,
    and a live model can too.
    """
    system_text = (
        "You are an agent playing a turn-based game. Play to maximize "
        "reward.\n\n" + spec.describe()
    )
    if icl_examples:
        icl_block = (
            "Example episodes from earlier plays:\n"
            + "\n".join(f"- {describe_trajectory(t)}" for t in icl_examples)
            + "\n\n"
        )
    else:
        icl_block = ""
    if steps:
        after = _observations_after(steps, observation)
        history_block = "\n".join(
            f"turn {s.turn}: played {s.committed_action} -> "
            f"{_transition_summary(after[i])}, reward {s.reward:g}"
            for i, s in enumerate(steps)
        )
    else:
        history_block = "(no turns yet)"
    state = {
        "env": spec.name,
        "turn": len(steps),
        "observation": observation,
        "history": [
            {
                "turn": s.turn,
                "action": s.committed_action,
                "reward": s.reward,
                "observation": _observations_after(steps, observation)[i],
            }
            for i, s in enumerate(steps)
        ],
    }
    if rules:
        rules_block = (
            "\nDirectives that worked in earlier episodes, most reliable "
            "first:\n" + "\n".join(f"- {describe_rule(r)}" for r in rules) + "\n"
        )
    else:
        rules_block = ""
    user_text = render_template(
        "action_prompt.txt",
        {
            "ICL_BLOCK": icl_block,
            "HISTORY_BLOCK": history_block,
            "STATE_BLOCK": format_state_block(state),
            "RULES_BLOCK": rules_block,
            "ANSWER_HINT": _ANSWER_HINTS.get(spec.action_kind, "<your action>"),
        },
    )
    return system_text, user_text


# -- single trajectory ------------------------------------------------------


def _default_action(env: Environment, words: WordList | None) -> Any:
    """Shape-safe substitute when a proposal cannot even be stepped."""
    if env.spec.action_kind == "word":
        pool = words if words is not None else getattr(env, "words")
        return pool.allowed[0]
    return 0


def run_trajectory(
    env: Environment,
    backend: CompletionBackend,
    config: RunConfig,
    seed: int,
    bank: RuleBank | None = None,
    profile: TaskProfile | None = None,
    icl_examples: Sequence[Trajectory] = (),
    words: WordList | None = None,
) -> Trajectory:
    """Play one episode; never raises for model misbehavior.

    Guided mode (bank and profile present) gates every proposal and falls
    back on rejection.  Baselines commit whatever parses and is steppable,
    recording honestly when it was invalid.  Transport failure aborts the
    trajectory with a diagnostic rather than crashing the run.
    """
    observation = env.reset(seed)
    steps: list[StepRecord] = []
    fallback_rng = SplitMix64(derive_seed(seed, FALLBACK_STREAM))
    guided = config.variant == "guided" and bank is not None and profile is not None
    allowed = words.allowed_set if words is not None else None
    enum_order = (
        "seeded_shuffle" if config.fallback_order == "random" else config.fallback_order
    )

    while not env.done:
        turn = len(steps) + 1
        applicable = bank.applicable(observation, turn, steps) if guided else []
        system_text, user_text = compose_prompt(
            env.spec, steps, observation, rules=applicable, icl_examples=icl_examples
        )
        try:
            response = backend.complete(
                CompletionRequest(
                    system_text,
                    user_text,
                    temperature=config.temperature,
                    max_output_tokens=config.max_output_tokens,
                    purpose="action",
                )
            )
        except TransportExhausted as exc:
            return Trajectory.from_steps(
                seed, steps, aborted=True, diagnostic=f"transport failed: {exc}"
            )
        proposed = parse_action(response, env.spec.action_kind)
        violation: str | None = None

        if guided:
            result = gate(proposed, env)
            if result.accepted:
                committed = result.action
                valid_first, fallback = True, False
            else:
                violation = result.violation
                try:
                    committed = fallback_generate(
                        env,
                        steps,
                        observation,
                        profile,
                        rng=fallback_rng,
                        order=enum_order,
                    )
                except NoValidAction as exc:
                    return Trajectory.from_steps(
                        seed,
                        steps,
                        aborted=True,
                        diagnostic=f"fallback found no valid action: {exc}",
                    )
                valid_first, fallback = False, True
        else:
            parse_failed = isinstance(proposed, ParseFailure)
            valid_first = (not parse_failed) and env.check_validity(proposed)
            if parse_failed or not env.is_well_formed(proposed):
                committed = _default_action(env, words)
                fallback = True
                violation = (
                    f"parse_failure: {proposed.reason}"
                    if parse_failed
                    else "{}: {}".format(*env.explain_invalid(proposed))
                )
            else:
                committed = proposed
                fallback = False
                if not valid_first:
                    violation = "{}: {}".format(*env.explain_invalid(proposed))

        proposed_record = (
            f"<unparseable: {proposed.reason}>"
            if isinstance(proposed, ParseFailure)
            else proposed
        )
        applied = [
            r.id
            for r in applicable
            if directive_matches(r, observation, steps, committed, allowed_words=allowed)
        ]
        observation, _, _, record = commit(
            env,
            committed,
            observation_before=observation,
            proposed_action=proposed_record,
            valid_on_first_try=valid_first,
            fallback_used=fallback,
            applied_rule_ids=applied,
            violation=violation,
        )
        steps.append(record)

    return Trajectory.from_steps(seed, steps)


# -- experiment loop --------------------------------------------------------


@dataclass
class ExperimentSummary:
    epochs_completed: int
    trajectories_total: int
    epochs_run_now: int


def _epoch_summary_line(epoch_log: EpochLog) -> str:
    rewards = epoch_log.rewards
    mean = sum(rewards) / len(rewards) if rewards else 0.0
    return (
        f"epoch {epoch_log.epoch}: mean reward {mean:.2f}, "
        f"{epoch_log.successes}/{len(epoch_log.trajectories)} successes"
    )


def _rebuild_epoch_summaries(
    past: Sequence[Trajectory], per_epoch: int
) -> list[str]:
    lines = []
    for start in range(0, len(past), per_epoch):
        chunk = list(past[start : start + per_epoch])
        if len(chunk) == per_epoch:
            lines.append(_epoch_summary_line(EpochLog(start // per_epoch + 1, chunk)))
    return lines


def run_experiment(
    run_dir: RunDirectory,
    config: RunConfig,
    backend: CompletionBackend | None = None,
    words: WordList | None = None,
    echo: Callable[[str], None] | None = None,
) -> ExperimentSummary:
    """Run (or finish) all configured epochs inside a prepared run directory.

    Identical configuration and master seed produce a byte-identical
    trajectory log.  On resume, any partial epoch at the file tail is dropped
    and re-run, because epoch membership is positional.
    """
    say = echo if echo is not None else (lambda message: None)
    if words is None:
        words = load_words(config)
    if backend is None:
        record = str(run_dir.responses_path) if config.backend == "remote" else None
        backend = make_backend(config.backend, words=words, record_path=record)

    guided = config.variant == "guided"
    bank = run_dir.load_bank()
    if bank is None:
        bank = RuleBank(
            min_applications=config.rule_min_applications,
            promote_threshold=config.rule_promote_threshold,
            retire_threshold=config.rule_retire_threshold,
            include_candidates=config.include_candidate_rules,
        )
    profile = run_dir.last_profile()
    spec = make_environment(config, words).spec
    profiler = Profiler(spec, config.profiler_backend, backend)
    allowed = words.allowed_set if words is not None else None

    kept = run_dir.truncate_partial_epoch(config.trajectories_per_epoch)
    start_epoch = kept // config.trajectories_per_epoch + 1
    past = run_dir.read_trajectories()
    success_pool = [t for t in past if t.success]
    epoch_summaries = _rebuild_epoch_summaries(past, config.trajectories_per_epoch)

    epochs_run_now = 0
    for epoch in range(start_epoch, config.epochs + 1):
        if guided and profile is None and epoch >= config.profile_epoch:
            profile = profiler.profile(epoch_summaries)
            run_dir.append_profile_event(epoch, profile, changed=True)
            say(f"task profiled: {json.dumps(profile.to_dict())}")

        icl_examples: tuple[Trajectory, ...] = ()
        if config.variant == "baseline_icl" and success_pool and config.icl_sample_count:
            rng = SplitMix64(derive_seed(config.master_seed, ICL_STREAM, epoch))
            count = min(config.icl_sample_count, len(success_pool))
            picks = sorted(rng.sample_indices(len(success_pool), count))
            icl_examples = tuple(success_pool[i] for i in picks)

        epoch_trajectories = []
        for index in range(1, config.trajectories_per_epoch + 1):
            seed = trajectory_seed(config.master_seed, epoch, index)
            env = make_environment(config, words)
            trajectory = run_trajectory(
                env,
                backend,
                config,
                seed,
                bank=bank if guided else None,
                profile=profile if guided else None,
                icl_examples=icl_examples,
                words=words,
            )
            trajectory.validate()
            run_dir.append_trajectory(trajectory)
            epoch_trajectories.append(trajectory)
            if trajectory.success:
                success_pool.append(trajectory)

        epoch_log = EpochLog(epoch, epoch_trajectories)
        line = _epoch_summary_line(epoch_log)
        epoch_summaries.append(line)
        run_dir.log(line)
        say(line)
        epochs_run_now += 1

        if guided and profile is not None:
            report = reasoning_update(
                bank,
                epoch_log,
                profile,
                spec.max_turns,
                backend=config.reasoning_backend,
                gateway=backend,
                env_description=spec.describe(),
                support_min=config.support_min,
                allowed_words=allowed,
            )
            run_dir.save_bank(bank)
            run_dir.log(report.summary())
            say(report.summary())
            if config.reprofile_each_epoch:
                profile, changed = profiler.reprofile_if_shifted(
                    profile, epoch_summaries
                )
                if changed:
                    run_dir.append_profile_event(epoch, profile, changed=True)
                    say(f"task profile shifted: {json.dumps(profile.to_dict())}")

    trajectories = run_dir.read_trajectories()
    rows = report_rows(
        trajectories,
        config.trajectories_per_epoch,
        config.env,
        bank=bank if guided else None,
        allowed_words=allowed,
    )
    run_dir.write_report(render_report_csv(rows))
    return ExperimentSummary(
        epochs_completed=len(trajectories) // config.trajectories_per_epoch,
        trajectories_total=len(trajectories),
        epochs_run_now=epochs_run_now,
    )
