"""Run configuration and the on-disk layout of a run directory.

A run directory is self-describing and append-only:

* ``config.toml`` - the resolved configuration snapshot;
* ``trajectories.jsonl`` - one trajectory per line, in execution order
  (epoch membership is positional: line i belongs to epoch
  i // trajectories_per_epoch, so the log format stays pure);
* ``rulebank.json`` - the rule bank after the latest reasoning pass;
* ``profile_history.jsonl`` - every profiling event, appended;
* ``report.csv`` - per-epoch metrics;
* ``run.log`` - human-readable progress notes;
* ``.lock`` - present while a process is writing.

Resuming re-derives everything positional from line counts; a partial epoch
at the tail (from a crash) is truncated before continuing.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .envs.core import Environment, Trajectory, trajectory_from_line, trajectory_to_line
from .envs.guess_number import GuessNumberEnv
from .envs.wordle import WordleEnv, WordList, load_word_list
from .errors import ConfigError, MissingRun
from .profiler import TaskProfile
from .rules import RuleBank

ENVIRONMENTS = ("gmn", "wordle")
VARIANTS = ("baseline", "baseline_icl", "guided")
FALLBACK_ORDERS = ("list", "lex", "random")

CONFIG_NAME = "config.toml"
TRAJECTORIES_NAME = "trajectories.jsonl"
RULEBANK_NAME = "rulebank.json"
PROFILE_HISTORY_NAME = "profile_history.jsonl"
REPORT_NAME = "report.csv"
LOG_NAME = "run.log"
RESPONSES_NAME = "responses.jsonl"
LOCK_NAME = ".lock"


@dataclass(frozen=True)
class RunConfig:
    env: str = "gmn"
    variant: str = "baseline"
    backend: str = "scripted:gmn_binary_search"
    epochs: int = 30
    trajectories_per_epoch: int = 20
    master_seed: int = 0
    wordlist: str | None = None  # custom file: both answer and allowed pool
    hard_validity: bool | None = None  # None: on for guided, off otherwise
    fallback_order: str = "list"
    temperature: float = 0.0
    max_output_tokens: int = 256
    icl_sample_count: int = 3
    profile_epoch: int = 1
    reprofile_each_epoch: bool = True
    profiler_backend: str = "heuristic"
    reasoning_backend: str = "miner"
    support_min: int = 3
    rule_min_applications: int = 5
    rule_promote_threshold: float = 0.8
    rule_retire_threshold: float = 0.4
    include_candidate_rules: bool = True

    def resolved(self) -> "RunConfig":
        """Fill variant-dependent defaults and validate."""
        config = self
        if config.hard_validity is None:
            config = replace(config, hard_validity=config.variant == "guided")
        config.validate()
        return config

    def validate(self) -> None:
        if self.env not in ENVIRONMENTS:
            raise ConfigError(f"env must be one of {ENVIRONMENTS}, got {self.env!r}")
        if self.variant not in VARIANTS:
            raise ConfigError(
                f"variant must be one of {VARIANTS}, got {self.variant!r}"
            )
        if self.fallback_order not in FALLBACK_ORDERS:
            raise ConfigError(
                f"fallback order must be one of {FALLBACK_ORDERS}, "
                f"got {self.fallback_order!r}"
            )
        if self.epochs < 1 or self.trajectories_per_epoch < 1:
            raise ConfigError("epochs and trajectories must be positive")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master seed must fit in 64 bits")
        if self.temperature < 0:
            raise ConfigError("temperature must be non-negative")
        if self.icl_sample_count < 0:
            raise ConfigError("icl_sample_count must be non-negative")
        if self.profile_epoch < 1:
            raise ConfigError("profile_epoch must be at least 1")
        if self.support_min < 1 or self.rule_min_applications < 1:
            raise ConfigError("support and application minimums must be positive")
        if not (
            0.0
            <= self.rule_retire_threshold
            <= self.rule_promote_threshold
            <= 1.0
        ):
            raise ConfigError("need 0 <= retire <= promote <= 1")
        if self.wordlist is not None and not Path(self.wordlist).exists():
            raise ConfigError(f"word list file not found: {self.wordlist}")
        if self.profiler_backend not in ("heuristic", "llm"):
            raise ConfigError(f"unknown profiler backend {self.profiler_backend!r}")
        if self.reasoning_backend not in ("miner", "llm"):
            raise ConfigError(f"unknown reasoning backend {self.reasoning_backend!r}")

    def to_toml_text(self) -> str:
        lines = ["[run]"]
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, bool):
                rendered = "true" if value else "false"
            elif isinstance(value, (int, float)):
                rendered = repr(value)
            else:
                rendered = json.dumps(value)  # TOML basic strings are JSON-safe
            lines.append(f"{f.name} = {rendered}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_toml(cls, path: str | Path) -> "RunConfig":
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise MissingRun(f"no config at {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        table = data.get("run", {})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(table) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**table)


def load_words(config: RunConfig) -> WordList | None:
    """Word pools for the run; None for numeric environments."""
    if config.env != "wordle":
        return None
    if config.wordlist is None:
        return load_word_list()
    words = [
        line.strip().lower()
        for line in Path(config.wordlist).read_text().splitlines()
        if line.strip()
    ]
    return WordList(words, words)


def make_environment(config: RunConfig, words: WordList | None) -> Environment:
    if config.env == "gmn":
        return GuessNumberEnv()
    assert words is not None
    return WordleEnv(words=words, hard_validity=bool(config.hard_validity))


class RunDirectory:
    """Paths and I/O for one run directory."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)

    @property
    def config_path(self) -> Path:
        return self.path / CONFIG_NAME

    @property
    def trajectories_path(self) -> Path:
        return self.path / TRAJECTORIES_NAME

    @property
    def rulebank_path(self) -> Path:
        return self.path / RULEBANK_NAME

    @property
    def profile_history_path(self) -> Path:
        return self.path / PROFILE_HISTORY_NAME

    @property
    def report_path(self) -> Path:
        return self.path / REPORT_NAME

    @property
    def log_path(self) -> Path:
        return self.path / LOG_NAME

    @property
    def responses_path(self) -> Path:
        return self.path / RESPONSES_NAME

    @property
    def lock_path(self) -> Path:
        return self.path / LOCK_NAME

    # -- lifecycle ---------------------------------------------------------

    def initialize(self, config: RunConfig, resume: bool) -> RunConfig:
        """Prepare the directory; returns the effective configuration.

        A fresh run writes the config snapshot.  A resumed run ignores the
        passed config except for identity checks and reuses the snapshot, so
        one run directory can never mix two configurations.
        """
        self.path.mkdir(parents=True, exist_ok=True)
        if self.config_path.exists():
            if not resume:
                raise ConfigError(
                    f"{self.path} already holds a run; pass --resume to continue it"
                )
            return RunConfig.from_toml(self.config_path).resolved()
        if resume:
            raise MissingRun(f"nothing to resume in {self.path}")
        self.config_path.write_text(config.to_toml_text())
        return config

    def require_run(self) -> RunConfig:
        if not self.config_path.exists():
            raise MissingRun(f"{self.path} is not a run directory")
        return RunConfig.from_toml(self.config_path).resolved()

    def acquire_lock(self) -> None:
        try:
            fd = os.open(self.lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise ConfigError(
                f"{self.path} is locked by another process "
                f"(remove {LOCK_NAME} if that process is gone)"
            ) from None
        with os.fdopen(fd, "w") as fh:
            fh.write(str(os.getpid()))

    def release_lock(self) -> None:
        try:
            self.lock_path.unlink()
        except FileNotFoundError:
            pass

    def log(self, message: str) -> None:
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        with open(self.log_path, "a") as fh:
            fh.write(f"{stamp} {message}\n")

    # -- trajectories --------------------------------------------------------

    def append_trajectory(self, trajectory: Trajectory) -> None:
        with open(self.trajectories_path, "a") as fh:
            fh.write(trajectory_to_line(trajectory) + "\n")

    def read_trajectories(self) -> list[Trajectory]:
        if not self.trajectories_path.exists():
            return []
        with open(self.trajectories_path) as fh:
            return [trajectory_from_line(line) for line in fh if line.strip()]

    def trajectory_count(self) -> int:
        if not self.trajectories_path.exists():
            return 0
        with open(self.trajectories_path) as fh:
            return sum(1 for line in fh if line.strip())

    def complete_epochs(self, per_epoch: int) -> int:
        return self.trajectory_count() // per_epoch

    def truncate_partial_epoch(self, per_epoch: int) -> int:
        """Drop tail lines past the last complete epoch; returns lines kept."""
        if not self.trajectories_path.exists():
            return 0
        with open(self.trajectories_path) as fh:
            lines = [line for line in fh if line.strip()]
        keep = (len(lines) // per_epoch) * per_epoch
        if keep != len(lines):
            with open(self.trajectories_path, "w") as fh:
                fh.writelines(lines[:keep])
        return keep

    # -- rule bank and profiles ---------------------------------------------

    def save_bank(self, bank: RuleBank) -> None:
        bank.save(self.rulebank_path)

    def load_bank(self) -> RuleBank | None:
        if not self.rulebank_path.exists():
            return None
        return RuleBank.load(self.rulebank_path)

    def append_profile_event(
        self, epoch: int, profile: TaskProfile, changed: bool
    ) -> None:
        entry = {"epoch": epoch, "changed": changed, "profile": profile.to_dict()}
        with open(self.profile_history_path, "a") as fh:
            fh.write(json.dumps(entry, separators=(",", ":")) + "\n")

    def last_profile(self) -> TaskProfile | None:
        if not self.profile_history_path.exists():
            return None
        last: TaskProfile | None = None
        with open(self.profile_history_path) as fh:
            for line in fh:
                if line.strip():
                    last = TaskProfile.from_dict(json.loads(line)["profile"])
        return last

    def write_report(self, text: str) -> None:
        self.report_path.write_text(text)
