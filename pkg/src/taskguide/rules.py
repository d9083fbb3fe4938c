"""Reasoning rules: structured conditions, bounded directives, lifecycle.

A rule says "when the observation looks like this, act like that".  The
condition side is a conjunction of field predicates plus an optional turn
window; the action side is one of a small closed set of directives so that
"the agent followed the rule" is mechanically checkable:

* ``constant`` - a literal action;
* ``template`` - an arithmetic recipe over the current observation and the
  previous committed action (``previous_guess_plus_hint``,
  ``previous_guess_minus_hint``, ``interval_midpoint``);
* ``policy`` - a set-membership discipline (``consistent_candidates``: the
  committed action lies in the feedback-consistent candidate set).

Rules carry usage statistics and move through candidate -> verified or
candidate -> retired once enough applications accumulate.  Identity is a
stable hash of the normalized condition and directive, so re-discovering the
same rule in a later epoch merges into the existing entry instead of
duplicating it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, Sequence

from . import constraints
from .envs.core import Observation, StepRecord
from .envs.guess_number import feasible_interval, interval_midpoint
from .errors import IoFailure, MalformedRule, SchemaVersionMismatch, UnknownRule

COMPARATORS = frozenset({"=", "!=", "<", "<=", ">", ">=", "present", "absent"})
TEMPLATES = frozenset(
    {"previous_guess_plus_hint", "previous_guess_minus_hint", "interval_midpoint"}
)
POLICIES = frozenset({"consistent_candidates"})
DIRECTIVE_KINDS = frozenset({"constant", "template", "policy"})

STATUS_CANDIDATE = "candidate"
STATUS_VERIFIED = "verified"
STATUS_RETIRED = "retired"
STATUSES = frozenset({STATUS_CANDIDATE, STATUS_VERIFIED, STATUS_RETIRED})

BANK_VERSION = 1

DEFAULT_MIN_APPLICATIONS = 5
DEFAULT_PROMOTE_THRESHOLD = 0.8
DEFAULT_RETIRE_THRESHOLD = 0.4


@dataclass(frozen=True)
class Predicate:
    """One field test.  `value` is unused for present/absent."""

    field: str
    op: str
    value: Any = None

    def matches(self, observation: Observation) -> bool:
        present = self.field in observation and observation[self.field] is not None
        if self.op == "present":
            return present
        if self.op == "absent":
            return not present
        if not present:
            return False  # comparisons require the field
        actual = observation[self.field]
        if self.op == "=":
            return actual == self.value
        if self.op == "!=":
            return actual != self.value
        try:
            if self.op == "<":
                return actual < self.value
            if self.op == "<=":
                return actual <= self.value
            if self.op == ">":
                return actual > self.value
            if self.op == ">=":
                return actual >= self.value
        except TypeError:
            return False
        raise MalformedRule(f"unknown comparator {self.op!r}")


@dataclass(frozen=True)
class Condition:
    """Conjunction of predicates, optionally limited to a turn window."""

    predicates: tuple[Predicate, ...]
    window: tuple[int, int] | None = None

    def matches(self, observation: Observation, turn: int) -> bool:
        if self.window is not None:
            low, high = self.window
            if not low <= turn <= high:
                return False
        return all(p.matches(observation) for p in self.predicates)


@dataclass(frozen=True)
class ActionDirective:
    """What to do when the condition holds.  See module docstring."""

    kind: str
    value: Any = None


@dataclass
class Rule:
    id: str
    condition: Condition
    directive: ActionDirective
    status: str = STATUS_CANDIDATE
    applications: int = 0
    successes: int = 0
    epoch_discovered: int | None = None
    source_seeds: tuple[int, ...] = ()
    free_text: str = ""

    @property
    def success_rate(self) -> float:
        """Observed success fraction; 0.0 before any application."""
        return self.successes / self.applications if self.applications else 0.0


def _normalized(condition: Condition, directive: ActionDirective) -> dict:
    predicates = sorted(
        (
            {"field": p.field, "op": p.op, "value": p.value}
            for p in condition.predicates
        ),
        key=lambda d: (d["field"], d["op"], json.dumps(d["value"], sort_keys=True)),
    )
    return {
        "predicates": predicates,
        "window": list(condition.window) if condition.window else None,
        "directive": {"kind": directive.kind, "value": directive.value},
    }


def rule_id(condition: Condition, directive: ActionDirective) -> str:
    """Stable 16-hex-char id; free text never participates."""
    canon = json.dumps(_normalized(condition, directive), sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def validate_rule_shape(condition: Condition, directive: ActionDirective) -> None:
    if not condition.predicates:
        raise MalformedRule("condition needs at least one predicate")
    for p in condition.predicates:
        if not isinstance(p.field, str) or not p.field:
            raise MalformedRule(f"bad predicate field {p.field!r}")
        if p.op not in COMPARATORS:
            raise MalformedRule(f"unknown comparator {p.op!r}")
    if condition.window is not None:
        low, high = condition.window
        if low < 1 or low > high:
            raise MalformedRule(f"bad turn window {condition.window!r}")
    if directive.kind not in DIRECTIVE_KINDS:
        raise MalformedRule(f"unknown directive kind {directive.kind!r}")
    if directive.kind == "template" and directive.value not in TEMPLATES:
        raise MalformedRule(f"unknown template {directive.value!r}")
    if directive.kind == "policy" and directive.value not in POLICIES:
        raise MalformedRule(f"unknown policy {directive.value!r}")
    if directive.kind == "constant" and directive.value is None:
        raise MalformedRule("constant directive needs a value")


def make_rule(
    condition: Condition,
    directive: ActionDirective,
    free_text: str = "",
    epoch_discovered: int | None = None,
    source_seeds: Iterable[int] = (),
) -> Rule:
    """Build a validated rule with its canonical id."""
    validate_rule_shape(condition, directive)
    return Rule(
        id=rule_id(condition, directive),
        condition=condition,
        directive=directive,
        epoch_discovered=epoch_discovered,
        source_seeds=tuple(source_seeds),
        free_text=free_text,
    )


class RuleBank:
    """Single-writer store of rules with promotion/retirement bookkeeping.

    ``applicable`` never returns retired rules; candidates are included by
    default (they must keep collecting applications or they could never be
    promoted), which callers can disable to act on verified rules only.
    """

    def __init__(
        self,
        min_applications: int = DEFAULT_MIN_APPLICATIONS,
        promote_threshold: float = DEFAULT_PROMOTE_THRESHOLD,
        retire_threshold: float = DEFAULT_RETIRE_THRESHOLD,
        include_candidates: bool = True,
    ) -> None:
        if not 0.0 <= retire_threshold <= promote_threshold <= 1.0:
            raise ValueError("need 0 <= retire <= promote <= 1")
        if min_applications < 1:
            raise ValueError("min_applications must be positive")
        self.min_applications = min_applications
        self.promote_threshold = promote_threshold
        self.retire_threshold = retire_threshold
        self.include_candidates = include_candidates
        self._rules: dict[str, Rule] = {}

    def __len__(self) -> int:
        return len(self._rules)

    def __contains__(self, rule_id_: str) -> bool:
        return rule_id_ in self._rules

    def get(self, rule_id_: str) -> Rule:
        try:
            return self._rules[rule_id_]
        except KeyError:
            raise UnknownRule(f"no rule with id {rule_id_!r}") from None

    def all_rules(self) -> list[Rule]:
        return sorted(self._rules.values(), key=lambda r: r.id)

    def counts_by_status(self) -> dict[str, int]:
        counts = {s: 0 for s in sorted(STATUSES)}
        for rule in self._rules.values():
            counts[rule.status] += 1
        return counts

    def register(self, rule: Rule) -> str:
        """Add a rule; re-registering an existing id keeps its statistics."""
        validate_rule_shape(rule.condition, rule.directive)
        expected = rule_id(rule.condition, rule.directive)
        if rule.id != expected:
            raise MalformedRule(
                f"rule id {rule.id!r} does not match its content hash {expected!r}"
            )
        existing = self._rules.get(rule.id)
        if existing is not None:
            # Merge provenance only; stats and status stay untouched.
            merged = tuple(
                sorted(set(existing.source_seeds) | set(rule.source_seeds))
            )
            self._rules[rule.id] = replace(existing, source_seeds=merged)
            return rule.id
        self._rules[rule.id] = rule
        return rule.id

    def applicable(
        self,
        observation: Observation,
        turn: int,
        history: Sequence[StepRecord] = (),
    ) -> list[Rule]:
        """Rules whose condition holds now, best evidence first.

        Order: success_rate desc, applications desc, id asc.  Rules with no
        applications rank as 0.0, so fresh candidates sort after anything
        with a track record.
        """
        del history  # reserved for history-dependent predicates
        matched = []
        for rule in self._rules.values():
            if rule.status == STATUS_RETIRED:
                continue
            if rule.status == STATUS_CANDIDATE and not self.include_candidates:
                continue
            if rule.condition.matches(observation, turn):
                matched.append(rule)
        matched.sort(key=lambda r: (-r.success_rate, -r.applications, r.id))
        return matched

    def record_outcome(self, rule_id_: str, success: bool) -> Rule:
        """Fold one application outcome into a rule's statistics.

        Once applications reach the minimum, a candidate is promoted when its
        success rate meets the promote threshold and retired when it falls to
        the retire threshold or below.  Verified and retired are terminal.
        """
        rule = self.get(rule_id_)
        rule = replace(
            rule,
            applications=rule.applications + 1,
            successes=rule.successes + (1 if success else 0),
        )
        if (
            rule.status == STATUS_CANDIDATE
            and rule.applications >= self.min_applications
        ):
            if rule.success_rate >= self.promote_threshold:
                rule = replace(rule, status=STATUS_VERIFIED)
            elif rule.success_rate <= self.retire_threshold:
                rule = replace(rule, status=STATUS_RETIRED)
        self._rules[rule_id_] = rule
        return rule

    # -- persistence ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "version": BANK_VERSION,
            "min_applications": self.min_applications,
            "promote_threshold": self.promote_threshold,
            "retire_threshold": self.retire_threshold,
            "include_candidates": self.include_candidates,
            "rules": [_rule_to_dict(r) for r in self.all_rules()],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RuleBank":
        version = data.get("version")
        if version != BANK_VERSION:
            raise SchemaVersionMismatch(
                f"rule bank version {version!r}, expected {BANK_VERSION}"
            )
        bank = cls(
            min_applications=data.get("min_applications", DEFAULT_MIN_APPLICATIONS),
            promote_threshold=data.get("promote_threshold", DEFAULT_PROMOTE_THRESHOLD),
            retire_threshold=data.get("retire_threshold", DEFAULT_RETIRE_THRESHOLD),
            include_candidates=data.get("include_candidates", True),
        )
        for entry in data["rules"]:
            rule = _rule_from_dict(entry)
            if rule.status not in STATUSES:
                raise MalformedRule(f"unknown status {rule.status!r}")
            validate_rule_shape(rule.condition, rule.directive)
            bank._rules[rule.id] = rule
        return bank

    def save(self, path) -> None:
        try:
            with open(path, "w") as fh:
                json.dump(self.to_dict(), fh, indent=2, sort_keys=False)
                fh.write("\n")
        except OSError as exc:
            raise IoFailure(f"cannot write rule bank to {path}") from exc

    @classmethod
    def load(cls, path) -> "RuleBank":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise IoFailure(f"cannot read rule bank from {path}") from exc
        return cls.from_dict(data)

    def fingerprint(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode()
        ).hexdigest()[:16]


def _rule_to_dict(rule: Rule) -> dict:
    return {
        "id": rule.id,
        "condition": {
            "predicates": [
                {"field": p.field, "op": p.op, "value": p.value}
                for p in rule.condition.predicates
            ],
            "window": list(rule.condition.window) if rule.condition.window else None,
        },
        "directive": {"kind": rule.directive.kind, "value": rule.directive.value},
        "status": rule.status,
        "applications": rule.applications,
        "successes": rule.successes,
        "epoch_discovered": rule.epoch_discovered,
        "source_seeds": list(rule.source_seeds),
        "free_text": rule.free_text,
    }


def _rule_from_dict(data: Mapping[str, Any]) -> Rule:
    cond = data["condition"]
    condition = Condition(
        predicates=tuple(
            Predicate(p["field"], p["op"], p.get("value")) for p in cond["predicates"]
        ),
        window=tuple(cond["window"]) if cond.get("window") else None,
    )
    directive = ActionDirective(data["directive"]["kind"], data["directive"].get("value"))
    return Rule(
        id=data["id"],
        condition=condition,
        directive=directive,
        status=data.get("status", STATUS_CANDIDATE),
        applications=data.get("applications", 0),
        successes=data.get("successes", 0),
        epoch_discovered=data.get("epoch_discovered"),
        source_seeds=tuple(data.get("source_seeds", ())),
        free_text=data.get("free_text", ""),
    )


# -- directive evaluation and the followed-the-rule check ------------------


def evaluate_directive(
    rule: Rule,
    observation: Observation,
    history: Sequence[StepRecord],
) -> Any | None:
    """Concrete action implied by a constant or template directive.

    Returns None when inputs are missing (no previous guess, no hint, no
    feasible interval yet) or for policy directives, which do not name a
    single action.
    """
    directive = rule.directive
    if directive.kind == "constant":
        return directive.value
    if directive.kind == "policy":
        return None
    hint = observation.get("hint")
    previous = history[-1].committed_action if history else None
    if directive.value == "previous_guess_plus_hint":
        if previous is None or hint is None:
            return None
        return previous + hint
    if directive.value == "previous_guess_minus_hint":
        if previous is None or hint is None:
            return None
        return previous - hint
    if directive.value == "interval_midpoint":
        interval = feasible_interval(history, observation)
        return interval_midpoint(interval) if interval else None
    raise MalformedRule(f"unknown template {directive.value!r}")


def directive_matches(
    rule: Rule,
    observation: Observation,
    history: Sequence[StepRecord],
    committed: Any,
    allowed_words: frozenset[str] | None = None,
) -> bool:
    """Did the committed action follow this rule's directive?

    Constants and templates match by equality with the evaluated action.
    The consistent-candidates policy matches when the committed word sits in
    the candidate set implied by the observation's feedback (and the allowed
    list, when one is supplied).
    """
    if rule.directive.kind == "policy":
        if rule.directive.value == "consistent_candidates":
            if not isinstance(committed, str):
                return False
            if allowed_words is not None and committed not in allowed_words:
                return False
            feedback = observation.get("feedback") or []
            state = constraints.state_from_history(
                (entry["guess"], entry["marks"]) for entry in feedback
            )
            return constraints.is_consistent(state, committed)
        raise MalformedRule(f"unknown policy {rule.directive.value!r}")
    expected = evaluate_directive(rule, observation, history)
    return expected is not None and expected == committed
