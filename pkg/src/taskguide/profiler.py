"""Task profiling: classify an environment's structural demands.

A :class:`TaskProfile` tells the agent how to reason about a task (mine
turn-to-turn tactics vs. episode-wide strategies) and how to generate
fallback actions (construct directly vs. filter a candidate list).  The
heuristic profiler is a pure function of the environment spec; the llm
profiler asks a completion backend and falls back to the heuristic when the
response does not parse.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Sequence

from .envs.core import EnvSpec
from .gateway import CompletionBackend, CompletionRequest
from .prompts import render_template

log = logging.getLogger(__name__)

SEQUENTIAL = "sequential"
CUMULATIVE = "cumulative"
LIGHT = "light"
HEAVY = "heavy"
DIRECT = "direct"
ENUMERATION = "enumeration"

_PROFILE_RE = re.compile(r"```profile\s*\n(.*?)```", re.DOTALL)


@dataclass(frozen=True)
class TaskProfile:
    temporal_structure: str  # sequential | cumulative
    constraint_intensity: str  # light | heavy
    generation_strategy: str  # direct | enumeration
    reasoning_window: int
    rationale: str = ""

    def __post_init__(self) -> None:
        if self.temporal_structure not in (SEQUENTIAL, CUMULATIVE):
            raise ValueError(f"bad temporal_structure {self.temporal_structure!r}")
        if self.constraint_intensity not in (LIGHT, HEAVY):
            raise ValueError(f"bad constraint_intensity {self.constraint_intensity!r}")
        if self.generation_strategy not in (DIRECT, ENUMERATION):
            raise ValueError(f"bad generation_strategy {self.generation_strategy!r}")
        if self.generation_strategy == ENUMERATION and self.constraint_intensity != HEAVY:
            raise ValueError("enumeration only makes sense under heavy constraints")
        if self.reasoning_window < 1:
            raise ValueError("reasoning_window must be positive")

    def same_categories(self, other: "TaskProfile") -> bool:
        """Equality on everything that changes behavior (rationale ignored)."""
        return (
            self.temporal_structure == other.temporal_structure
            and self.constraint_intensity == other.constraint_intensity
            and self.generation_strategy == other.generation_strategy
            and self.reasoning_window == other.reasoning_window
        )

    def to_dict(self) -> dict:
        return {
            "temporal_structure": self.temporal_structure,
            "constraint_intensity": self.constraint_intensity,
            "generation_strategy": self.generation_strategy,
            "reasoning_window": self.reasoning_window,
            "rationale": self.rationale,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TaskProfile":
        return cls(
            temporal_structure=data["temporal_structure"],
            constraint_intensity=data["constraint_intensity"],
            generation_strategy=data["generation_strategy"],
            reasoning_window=data["reasoning_window"],
            rationale=data.get("rationale", ""),
        )


def heuristic_profile(spec: EnvSpec) -> TaskProfile:
    """Classification from the EnvSpec alone; deterministic.

    Accumulating list-shaped observations mark a cumulative task; a word
    vocabulary or history-dependent validity marks heavy constraints, and
    heavy constraints favor enumeration over direct construction.
    """
    cumulative = any(f.kind == "list" for f in spec.observation_fields)
    heavy = spec.validity_uses_history or spec.action_kind == "word"
    return TaskProfile(
        temporal_structure=CUMULATIVE if cumulative else SEQUENTIAL,
        constraint_intensity=HEAVY if heavy else LIGHT,
        generation_strategy=ENUMERATION if heavy else DIRECT,
        reasoning_window=spec.max_turns,
        rationale="derived from environment descriptors",
    )


def parse_profile_response(text: str, max_turns: int) -> TaskProfile | None:
    """Parse a fenced profile block; None when absent or unusable."""
    found = _PROFILE_RE.findall(text)
    if not found:
        return None
    values: dict[str, str] = {}
    for line in found[-1].splitlines():
        key, sep, value = line.partition(":")
        if sep:
            values[key.strip()] = value.strip()
    try:
        window = int(values.get("reasoning_window", ""))
    except ValueError:
        return None
    window = max(1, min(window, max_turns))
    try:
        return TaskProfile(
            temporal_structure=values.get("temporal_structure", ""),
            constraint_intensity=values.get("constraint_intensity", ""),
            generation_strategy=values.get("generation_strategy", ""),
            reasoning_window=window,
            rationale=values.get("rationale", ""),
        )
    except ValueError:
        return None


class Profiler:
    """Produces and refreshes task profiles for one environment."""

    def __init__(
        self,
        spec: EnvSpec,
        backend: str = "heuristic",
        gateway: CompletionBackend | None = None,
    ) -> None:
        if backend not in ("heuristic", "llm"):
            raise ValueError(f"unknown profiler backend {backend!r}")
        if backend == "llm" and gateway is None:
            raise ValueError("llm profiler needs a completion backend")
        self.spec = spec
        self.backend = backend
        self.gateway = gateway

    def profile(self, epoch_summaries: Sequence[str] = ()) -> TaskProfile:
        """Classify the task, optionally informed by past epoch summaries.

        Transport failures from the llm backend propagate (the caller decides
        whether to substitute the heuristic); unparseable responses degrade
        to the heuristic with a warning.
        """
        if self.backend == "heuristic":
            return heuristic_profile(self.spec)
        assert self.gateway is not None
        summaries = "\n".join(epoch_summaries) if epoch_summaries else "(none yet)"
        prompt = render_template(
            "profiler_prompt.txt",
            {"ENV_DESCRIPTION": self.spec.describe(), "EPOCH_SUMMARIES": summaries},
        )
        response = self.gateway.complete(
            CompletionRequest(
                system_text="You classify turn-based tasks by structure.",
                user_text=prompt,
                purpose="profiling",
            )
        )
        parsed = parse_profile_response(response, self.spec.max_turns)
        if parsed is None:
            log.warning("profile response unusable; falling back to heuristic")
            return heuristic_profile(self.spec)
        return parsed

    def reprofile_if_shifted(
        self, prior: TaskProfile, epoch_summaries: Sequence[str] = ()
    ) -> tuple[TaskProfile, bool]:
        """Re-run profiling; returns (profile, changed).

        The fresh profile replaces the prior only when a behavioral category
        moved, so rationale-only drift never churns downstream consumers.
        """
        fresh = self.profile(epoch_summaries)
        if fresh.same_categories(prior):
            return prior, False
        return fresh, True
