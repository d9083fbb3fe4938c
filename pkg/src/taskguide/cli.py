"""Command-line interface.

Subcommands:

* ``run``    - execute an experiment into a run directory (resumable);
* ``rules``  - inspect or audit the rule bank of a finished run;
* ``report`` - recompute per-epoch metrics from the logs;
* ``replay`` - re-execute logged trajectories and verify them bit-for-bit.

Exit codes: 0 success, 1 configuration or lookup error, 2 runtime failure
mid-run, 3 verification mismatch (audit or replay found a discrepancy).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import __version__
from .agent import run_experiment
from .envs.core import Trajectory
from .errors import (
    ConfigError,
    MissingRun,
    MissingTrajectory,
    TaskGuideError,
)
from .metrics import render_report_csv, render_report_table, report_rows
from .rules import directive_matches
from .runs import RunConfig, RunDirectory, load_words, make_environment

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_MISMATCH = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taskguide",
        description="Guided multi-turn task completion experiments.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment")
    run.add_argument("--config", help="TOML file with a [run] table")
    run.add_argument("--env", choices=("gmn", "wordle"))
    run.add_argument("--variant", choices=("baseline", "baseline_icl", "guided"))
    run.add_argument(
        "--backend", help="remote, scripted:<policy>, or replay:<path>"
    )
    run.add_argument("--epochs", type=int)
    run.add_argument("--trajectories", type=int, help="trajectories per epoch")
    run.add_argument("--seed", type=int, help="master seed")
    run.add_argument("--wordlist", help="custom word list file (wordle)")
    run.add_argument("--hard-validity", choices=("on", "off"))
    run.add_argument("--fallback-order", choices=("list", "lex", "random"))
    run.add_argument("--out", required=True, help="run directory")
    run.add_argument(
        "--resume", action="store_true", help="continue an interrupted run"
    )
    run.set_defaults(func=cmd_run)

    rules = sub.add_parser("rules", help="inspect the rule bank of a run")
    rules_sub = rules.add_subparsers(dest="rules_command", required=True)
    rules_list = rules_sub.add_parser("list", help="list rules with statistics")
    rules_list.add_argument("--run", required=True, help="run directory")
    rules_list.set_defaults(func=cmd_rules_list)
    rules_show = rules_sub.add_parser("show", help="show one rule as JSON")
    rules_show.add_argument("rule_id")
    rules_show.add_argument("--run", required=True, help="run directory")
    rules_show.set_defaults(func=cmd_rules_show)
    rules_audit = rules_sub.add_parser(
        "audit", help="re-verify every logged rule application"
    )
    rules_audit.add_argument("--run", required=True, help="run directory")
    rules_audit.set_defaults(func=cmd_rules_audit)

    report = sub.add_parser("report", help="recompute per-epoch metrics")
    report.add_argument("--run", required=True, help="run directory")
    report.set_defaults(func=cmd_report)

    replay = sub.add_parser("replay", help="verify logged trajectories")
    replay.add_argument("--run", required=True, help="run directory")
    replay.add_argument(
        "--trajectory",
        type=int,
        help="1-based index of a single trajectory (default: all)",
    )
    replay.set_defaults(func=cmd_replay)
    return parser


def _settle_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then config file, then command-line flags."""
    config = RunConfig.from_toml(args.config) if args.config else RunConfig()
    overrides: dict = {}
    if args.env is not None:
        overrides["env"] = args.env
    if args.variant is not None:
        overrides["variant"] = args.variant
    if args.backend is not None:
        overrides["backend"] = args.backend
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.trajectories is not None:
        overrides["trajectories_per_epoch"] = args.trajectories
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.wordlist is not None:
        overrides["wordlist"] = args.wordlist
    if args.hard_validity is not None:
        overrides["hard_validity"] = args.hard_validity == "on"
    if args.fallback_order is not None:
        overrides["fallback_order"] = args.fallback_order
    return dataclasses.replace(config, **overrides).resolved()


def cmd_run(args: argparse.Namespace) -> int:
    config = _settle_config(args)
    run_dir = RunDirectory(args.out)
    config = run_dir.initialize(config, resume=args.resume)
    run_dir.acquire_lock()
    try:
        summary = run_experiment(run_dir, config, echo=print)
    except TaskGuideError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    finally:
        run_dir.release_lock()
    print(
        f"done: {summary.epochs_completed} epochs, "
        f"{summary.trajectories_total} trajectories in {run_dir.path}"
    )
    return EXIT_OK


def cmd_rules_list(args: argparse.Namespace) -> int:
    run_dir = RunDirectory(args.run)
    run_dir.require_run()
    bank = run_dir.load_bank()
    if bank is None:
        raise MissingRun(f"{run_dir.path} has no rule bank")
    rules = sorted(
        bank.all_rules(), key=lambda r: (-r.success_rate, -r.applications, r.id)
    )
    print(f"{'id':16}  {'status':9}  {'wins':>9}  rule")
    for rule in rules:
        from .agent import describe_rule  # local import avoids a cycle

        print(
            f"{rule.id:16}  {rule.status:9}  "
            f"{rule.successes:>4}/{rule.applications:<4}  {describe_rule(rule)}"
        )
    print(f"{len(rules)} rules ({json.dumps(bank.counts_by_status())})")
    return EXIT_OK


def cmd_rules_show(args: argparse.Namespace) -> int:
    run_dir = RunDirectory(args.run)
    run_dir.require_run()
    bank = run_dir.load_bank()
    if bank is None:
        raise MissingRun(f"{run_dir.path} has no rule bank")
    rule = bank.get(args.rule_id)
    from .rules import _rule_to_dict

    print(json.dumps(_rule_to_dict(rule), indent=2))
    return EXIT_OK


def cmd_rules_audit(args: argparse.Namespace) -> int:
    """Re-derive every logged rule application from first principles."""
    run_dir = RunDirectory(args.run)
    config = run_dir.require_run()
    bank = run_dir.load_bank()
    if bank is None:
        raise MissingRun(f"{run_dir.path} has no rule bank")
    words = load_words(config)
    allowed = words.allowed_set if words else None
    checked = 0
    mismatches = 0
    for t_index, trajectory in enumerate(run_dir.read_trajectories(), start=1):
        for s_index, step in enumerate(trajectory.steps):
            prefix = trajectory.steps[:s_index]
            for rule_id_ in step.applied_rule_ids:
                checked += 1
                if rule_id_ not in bank:
                    mismatches += 1
                    print(
                        f"trajectory {t_index} turn {step.turn}: "
                        f"rule {rule_id_} not in bank"
                    )
                    continue
                rule = bank.get(rule_id_)
                if not rule.condition.matches(step.observation_before, step.turn):
                    mismatches += 1
                    print(
                        f"trajectory {t_index} turn {step.turn}: "
                        f"rule {rule_id_} condition did not hold"
                    )
                elif not directive_matches(
                    rule,
                    step.observation_before,
                    prefix,
                    step.committed_action,
                    allowed_words=allowed,
                ):
                    mismatches += 1
                    print(
                        f"trajectory {t_index} turn {step.turn}: "
                        f"rule {rule_id_} directive not followed by "
                        f"{step.committed_action!r}"
                    )
    print(f"audit: {checked} applications checked, {mismatches} mismatches")
    return EXIT_OK if mismatches == 0 else EXIT_MISMATCH


def cmd_report(args: argparse.Namespace) -> int:
    run_dir = RunDirectory(args.run)
    config = run_dir.require_run()
    trajectories = run_dir.read_trajectories()
    if not trajectories:
        raise MissingRun(f"{run_dir.path} has no trajectories")
    words = load_words(config)
    rows = report_rows(
        trajectories,
        config.trajectories_per_epoch,
        config.env,
        bank=run_dir.load_bank(),
        allowed_words=words.allowed_set if words else None,
    )
    rendered = render_report_csv(rows)
    if run_dir.report_path.exists():
        cached = run_dir.report_path.read_text()
        if cached != rendered:
            print(
                "warning: stored report.csv differed from recomputed metrics; "
                "overwriting",
                file=sys.stderr,
            )
    run_dir.write_report(rendered)
    print(render_report_table(rows))
    return EXIT_OK


def _replay_one(trajectory: Trajectory, config: RunConfig, words) -> list[str]:
    """Mismatch descriptions from re-running one trajectory; empty when clean."""
    problems = []
    env = make_environment(config, words)
    observation = env.reset(trajectory.seed)
    if trajectory.steps and observation != trajectory.steps[0].observation_before:
        problems.append("initial observation differs")
    for i, step in enumerate(trajectory.steps):
        observation, reward, done = env.step(step.committed_action)
        if reward != step.reward:
            problems.append(f"turn {step.turn}: reward {reward} != {step.reward}")
        if done != step.done:
            problems.append(f"turn {step.turn}: done {done} != {step.done}")
        following = trajectory.steps[i + 1 : i + 2]
        if following and observation != following[0].observation_before:
            problems.append(f"turn {step.turn}: resulting observation differs")
        if done:
            break
    return problems


def cmd_replay(args: argparse.Namespace) -> int:
    run_dir = RunDirectory(args.run)
    config = run_dir.require_run()
    trajectories = run_dir.read_trajectories()
    if not trajectories:
        raise MissingRun(f"{run_dir.path} has no trajectories")
    words = load_words(config)
    if args.trajectory is not None:
        if not 1 <= args.trajectory <= len(trajectories):
            raise MissingTrajectory(
                f"trajectory {args.trajectory} not in 1..{len(trajectories)}"
            )
        targets = [(args.trajectory, trajectories[args.trajectory - 1])]
    else:
        targets = list(enumerate(trajectories, start=1))
    failures = 0
    for index, trajectory in targets:
        problems = _replay_one(trajectory, config, words)
        if problems:
            failures += 1
            for problem in problems:
                print(f"trajectory {index}: {problem}")
    verdict = "OK" if failures == 0 else "MISMATCH"
    print(f"replay: {len(targets)} trajectories verified, {failures} mismatches [{verdict}]")
    return EXIT_OK if failures == 0 else EXIT_MISMATCH


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, MissingRun, MissingTrajectory) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TaskGuideError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
