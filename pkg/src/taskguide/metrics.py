"""Per-epoch metrics and the run report.

Everything here is recomputed from trajectory logs; the flags a run wrote at
play time (`valid_on_first_try`, `fallback_used`) are trusted only for what
they claim about the proposal path, never for compliance itself, which is
rebuilt from the logged observations.
"""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass
from typing import Callable, Sequence

from scipy import stats as scipy_stats

from . import constraints
from .envs.core import EpochLog, StepRecord, Trajectory
from .envs.guess_number import HIGH, LOW
from .errors import InsufficientData
from .rules import RuleBank, directive_matches

REPORT_COLUMNS = (
    "epoch",
    "mean_reward",
    "ci_low",
    "ci_high",
    "consistency_ratio",
    "compliance_ratio",
    "recovery_rate",
    "success_rate",
)

# checker(step, history prefix) -> committed action complies with constraints
ComplianceChecker = Callable[[StepRecord, Sequence[StepRecord]], bool]


@dataclass(frozen=True)
class RewardStats:
    mean: float
    ci_low: float
    ci_high: float
    n: int


def reward_stats(rewards: Sequence[float], confidence: float = 0.95) -> RewardStats:
    """Mean and Student-t confidence interval of final rewards."""
    n = len(rewards)
    if n < 2:
        raise InsufficientData(f"need at least 2 rewards for a CI, got {n}")
    mean = statistics.fmean(rewards)
    sd = statistics.stdev(rewards)
    quantile = float(scipy_stats.t.ppf((1 + confidence) / 2, n - 1))
    half_width = quantile * sd / n**0.5
    return RewardStats(mean, mean - half_width, mean + half_width, n)


def _gmn_compliant(step: StepRecord, history: Sequence[StepRecord]) -> bool:
    del history
    action = step.committed_action
    return (
        isinstance(action, int)
        and not isinstance(action, bool)
        and LOW <= action <= HIGH
    )


def _wordle_compliant(step: StepRecord, history: Sequence[StepRecord]) -> bool:
    del history
    action = step.committed_action
    if not isinstance(action, str):
        return False
    feedback = step.observation_before.get("feedback") or []
    state = constraints.state_from_history(
        (entry["guess"], entry["marks"]) for entry in feedback
    )
    return constraints.is_consistent(state, action)


def make_compliance_checker(env_name: str) -> ComplianceChecker:
    """Compliance is judged against feedback visible when the action was chosen."""
    if env_name == "gmn":
        return _gmn_compliant
    if env_name == "wordle":
        return _wordle_compliant
    raise ValueError(f"no compliance checker for environment {env_name!r}")


def compliance_ratio(
    epoch_log: EpochLog, checker: ComplianceChecker
) -> float | None:
    """Fraction of committed actions that satisfy the rebuilt constraints."""
    total = 0
    compliant = 0
    for trajectory in epoch_log.trajectories:
        for i, step in enumerate(trajectory.steps):
            total += 1
            if checker(step, trajectory.steps[:i]):
                compliant += 1
    return compliant / total if total else None


def recovery_rate(epoch_log: EpochLog, checker: ComplianceChecker) -> float | None:
    """Of turns whose first proposal was invalid, how many the fallback saved.

    None when no turn ever needed rescue (the ratio is undefined, not 1.0).
    """
    needed = 0
    recovered = 0
    for trajectory in epoch_log.trajectories:
        for i, step in enumerate(trajectory.steps):
            if step.valid_on_first_try:
                continue
            needed += 1
            if step.fallback_used and checker(step, trajectory.steps[:i]):
                recovered += 1
    return recovered / needed if needed else None


def consistency_ratio(
    epoch_log: EpochLog,
    bank: RuleBank,
    allowed_words: frozenset[str] | None = None,
) -> float | None:
    """Of turns with at least one applicable rule, how many followed one.

    Applicability and directive matching are re-derived from the bank and the
    logged observations, so the ratio can be audited long after the run.
    None when no turn had an applicable rule.
    """
    had_rule = 0
    followed = 0
    for trajectory in epoch_log.trajectories:
        for i, step in enumerate(trajectory.steps):
            applicable = bank.applicable(step.observation_before, step.turn)
            if not applicable:
                continue
            had_rule += 1
            if any(
                directive_matches(
                    rule,
                    step.observation_before,
                    trajectory.steps[:i],
                    step.committed_action,
                    allowed_words=allowed_words,
                )
                for rule in applicable
            ):
                followed += 1
    return followed / had_rule if had_rule else None


def success_by_turn(
    trajectories: Sequence[Trajectory], max_turns: int
) -> list[int]:
    """Histogram of winning turns: index t-1 counts successes on turn t."""
    counts = [0] * max_turns
    for trajectory in trajectories:
        if trajectory.success and 1 <= trajectory.turn_count <= max_turns:
            counts[trajectory.turn_count - 1] += 1
    return counts


@dataclass(frozen=True)
class EpochReportRow:
    epoch: int
    mean_reward: float
    ci_low: float | None
    ci_high: float | None
    consistency_ratio: float | None
    compliance_ratio: float | None
    recovery_rate: float | None
    success_rate: float


def epoch_report_row(
    epoch_log: EpochLog,
    env_name: str,
    bank: RuleBank | None = None,
    allowed_words: frozenset[str] | None = None,
) -> EpochReportRow:
    rewards = epoch_log.rewards
    if not rewards:
        raise InsufficientData(f"epoch {epoch_log.epoch} has no trajectories")
    try:
        stats = reward_stats(rewards)
        ci_low, ci_high = stats.ci_low, stats.ci_high
        mean = stats.mean
    except InsufficientData:
        mean = statistics.fmean(rewards)
        ci_low = ci_high = None
    checker = make_compliance_checker(env_name)
    return EpochReportRow(
        epoch=epoch_log.epoch,
        mean_reward=mean,
        ci_low=ci_low,
        ci_high=ci_high,
        consistency_ratio=(
            consistency_ratio(epoch_log, bank, allowed_words) if bank else None
        ),
        compliance_ratio=compliance_ratio(epoch_log, checker),
        recovery_rate=recovery_rate(epoch_log, checker),
        success_rate=epoch_log.successes / len(epoch_log.trajectories),
    )


def report_rows(
    trajectories: Sequence[Trajectory],
    per_epoch: int,
    env_name: str,
    bank: RuleBank | None = None,
    allowed_words: frozenset[str] | None = None,
) -> list[EpochReportRow]:
    """Rows for every complete epoch in a positional trajectory log."""
    rows = []
    for start in range(0, len(trajectories) - per_epoch + 1, per_epoch):
        chunk = list(trajectories[start : start + per_epoch])
        epoch_log = EpochLog(start // per_epoch + 1, chunk)
        rows.append(epoch_report_row(epoch_log, env_name, bank, allowed_words))
    return rows


def _cell(value: float | int | None) -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return f"{value:.6f}"


def render_report_csv(rows: Sequence[EpochReportRow]) -> str:
    """Deterministic CSV text: fixed columns, fixed float formatting."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for row in rows:
        writer.writerow(
            [
                row.epoch,
                _cell(row.mean_reward),
                _cell(row.ci_low),
                _cell(row.ci_high),
                _cell(row.consistency_ratio),
                _cell(row.compliance_ratio),
                _cell(row.recovery_rate),
                _cell(row.success_rate),
            ]
        )
    return buffer.getvalue()


def render_report_table(rows: Sequence[EpochReportRow]) -> str:
    """Console-friendly fixed-width table of the same report."""
    header = (
        f"{'epoch':>5} {'mean':>9} {'ci_low':>9} {'ci_high':>9} "
        f"{'consist':>8} {'comply':>8} {'recover':>8} {'success':>8}"
    )
    lines = [header]
    for row in rows:
        def fmt(value: float | None, width: int) -> str:
            return f"{value:>{width}.3f}" if value is not None else " " * (width - 1) + "-"

        lines.append(
            f"{row.epoch:>5} {fmt(row.mean_reward, 9)} {fmt(row.ci_low, 9)} "
            f"{fmt(row.ci_high, 9)} {fmt(row.consistency_ratio, 8)} "
            f"{fmt(row.compliance_ratio, 8)} {fmt(row.recovery_rate, 8)} "
            f"{fmt(row.success_rate, 8)}"
        )
    return "\n".join(lines)
