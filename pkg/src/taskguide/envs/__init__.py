"""Turn-based environments and the shared interface they implement."""

from .core import (
    Action,
    Environment,
    EnvSpec,
    EpochLog,
    FieldSpec,
    Observation,
    StepRecord,
    Trajectory,
    trajectory_from_line,
    trajectory_to_line,
)
from .guess_number import GuessNumberEnv
from .wordle import WordleEnv, WordList, load_word_list, score_guess

__all__ = [
    "Action",
    "Environment",
    "EnvSpec",
    "EpochLog",
    "FieldSpec",
    "GuessNumberEnv",
    "Observation",
    "StepRecord",
    "Trajectory",
    "WordList",
    "WordleEnv",
    "load_word_list",
    "score_guess",
    "trajectory_from_line",
    "trajectory_to_line",
]
