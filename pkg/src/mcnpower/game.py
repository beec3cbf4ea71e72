"""Rule-based coalition games.

A game over ``m`` agents is a list of weighted rules. Each rule names the
agents a coalition must contain (``req``) and the agents it must not
contain (``ban``); a coalition that satisfies both conditions collects the
rule's weight, and the value of a coalition is the sum over all rules it
satisfies.

Coalitions and rule masks are plain integer bitmasks (bit ``i`` = agent
``i``), capped at 64 agents so a coalition always fits one machine word.
All containers here are immutable after construction and every operation
is a pure function, so values can be shared freely across workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DataFormatError, GameSizeError, RuleSetValidationError

MAX_AGENTS = 64

# A coalition is just a bitmask over agents 0..m-1.
Coalition = int


def mask_of(agents: Iterable[int]) -> int:
    """Build a bitmask from agent indices."""
    mask = 0
    for a in agents:
        mask |= 1 << a
    return mask


def mask_members(mask: int) -> list[int]:
    """Agent indices contained in a bitmask, ascending."""
    out = []
    a = 0
    while mask:
        if mask & 1:
            out.append(a)
        mask >>= 1
        a += 1
    return out


@dataclass(frozen=True)
class Rule:
    """One weighted rule: required agents, banned agents, and a real weight."""

    req: int
    ban: int
    weight: float


@dataclass(frozen=True)
class RuleSet:
    """An ordered collection of rules over a fixed agent universe.

    ``total_weight`` is cached at construction; ``validate_ruleset`` can
    check it (and every other invariant) after the fact, which matters for
    rule sets loaded from untrusted files.
    """

    m: int
    rules: tuple[Rule, ...]
    total_weight: float = field(default=None)  # type: ignore[assignment]
    agent_names: tuple[str, ...] | None = None

    def __post_init__(self):
        if not 1 <= self.m <= MAX_AGENTS:
            raise GameSizeError(
                f"agent count must be in [1, {MAX_AGENTS}], got {self.m}"
            )
        object.__setattr__(self, "rules", tuple(self.rules))
        if self.total_weight is None:
            object.__setattr__(
                self, "total_weight", float(sum(r.weight for r in self.rules))
            )
        if self.agent_names is not None:
            object.__setattr__(self, "agent_names", tuple(self.agent_names))

    @property
    def n(self) -> int:
        return len(self.rules)

    def full_mask(self) -> int:
        """Bitmask of the grand coalition (all m agents)."""
        return (1 << self.m) - 1

    def mask_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Rule masks and weights as numpy arrays, for vectorized evaluation."""
        req = np.array([r.req for r in self.rules], dtype=np.uint64)
        ban = np.array([r.ban for r in self.rules], dtype=np.uint64)
        w = np.array([r.weight for r in self.rules], dtype=np.float64)
        return req, ban, w


def rule_matches(rule: Rule, c: Coalition) -> bool:
    """True iff the coalition contains all required and no banned agents."""
    return (c & rule.req) == rule.req and (c & rule.ban) == 0


def coalition_value(rs: RuleSet, c: Coalition) -> float:
    """Sum of weights over all rules the coalition satisfies."""
    total = 0.0
    for r in rs.rules:
        if (c & r.req) == r.req and (c & r.ban) == 0:
            total += r.weight
    return total


def changed_rules(rs: RuleSet, c1: Coalition, c2: Coalition) -> list[int]:
    """Indices of rules whose match status differs between two coalitions."""
    return [
        i
        for i, r in enumerate(rs.rules)
        if rule_matches(r, c1) != rule_matches(r, c2)
    ]


def delta_weight(rs: RuleSet, c1: Coalition, c2: Coalition) -> float:
    """Gross weight of all rules whose status changes between two coalitions.

    This is an unsigned per-rule total: rules gained and rules lost both
    add their weight, so for nonnegative weights it upper-bounds the net
    value change ``|v(c1) - v(c2)|``.
    """
    total = 0.0
    for r in rs.rules:
        if rule_matches(r, c1) != rule_matches(r, c2):
            total += r.weight
    return total


def validate_ruleset(rs: RuleSet) -> list[str]:
    """Check all structural invariants; return a list of violations (empty = ok)."""
    violations = []
    universe = rs.full_mask()
    for i, r in enumerate(rs.rules):
        if r.req & r.ban:
            overlap = mask_members(r.req & r.ban)
            violations.append(f"rule {i}: agents {overlap} both required and banned")
        if r.req & ~universe:
            violations.append(f"rule {i}: required agents outside universe of {rs.m}")
        if r.ban & ~universe:
            violations.append(f"rule {i}: banned agents outside universe of {rs.m}")
        if r.req < 0 or r.ban < 0:
            violations.append(f"rule {i}: negative mask")
    recomputed = float(sum(r.weight for r in rs.rules))
    if rs.total_weight != recomputed:
        violations.append(
            f"cached total_weight {rs.total_weight!r} != recomputed {recomputed!r}"
        )
    if rs.agent_names is not None and len(rs.agent_names) != rs.m:
        violations.append(
            f"agent_names has {len(rs.agent_names)} entries for {rs.m} agents"
        )
    return violations


def match_matrix(
    masks: np.ndarray, req: np.ndarray, ban: np.ndarray
) -> np.ndarray:
    """Match status of every (coalition, rule) pair.

    ``masks`` is a uint64 array of coalition bitmasks; ``req``/``ban`` are
    the per-rule uint64 mask arrays. Returns a bool array of shape
    ``masks.shape + (n_rules,)``.
    """
    c = masks[..., None]
    return ((c & req) == req) & ((c & ban) == 0)


def values_for_masks(rs: RuleSet, masks: np.ndarray) -> np.ndarray:
    """Coalition values for an array of bitmasks (vectorized ``coalition_value``)."""
    req, ban, w = rs.mask_arrays()
    return match_matrix(masks.astype(np.uint64), req, ban).astype(np.float64) @ w


def iter_subsets(mask: int) -> Iterator[int]:
    """All submasks of ``mask``, including 0 and ``mask`` itself."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


# --- JSON wire format -------------------------------------------------------
#
# {"m": int, "agent_names": [str]?, "rules": [{"req": [int], "ban": [int],
#  "weight": float}]}
#
# Serialization sorts index lists and relies on Python's shortest-repr float
# formatting, so parse -> serialize round trips are byte-stable.


def ruleset_to_json(rs: RuleSet) -> str:
    doc: dict = {"m": rs.m}
    if rs.agent_names is not None:
        doc["agent_names"] = list(rs.agent_names)
    doc["rules"] = [
        {
            "req": mask_members(r.req),
            "ban": mask_members(r.ban),
            "weight": float(r.weight),
        }
        for r in rs.rules
    ]
    return json.dumps(doc, indent=2) + "\n"


def ruleset_from_json(text: str) -> RuleSet:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise DataFormatError(f"invalid rule-set JSON: {e}") from e
    if not isinstance(doc, dict) or "m" not in doc or "rules" not in doc:
        raise DataFormatError("rule-set JSON must be an object with 'm' and 'rules'")
    m = doc["m"]
    if not isinstance(m, int):
        raise DataFormatError("'m' must be an integer")
    names = doc.get("agent_names")
    if names is not None:
        if not (isinstance(names, list) and all(isinstance(s, str) for s in names)):
            raise DataFormatError("'agent_names' must be a list of strings")

    def to_mask(indices, where: str) -> int:
        if not (isinstance(indices, list) and all(isinstance(i, int) for i in indices)):
            raise DataFormatError(f"{where} must be a list of agent indices")
        if any(i < 0 or i >= m for i in indices):
            raise DataFormatError(f"{where} has agent index outside [0, {m})")
        return mask_of(indices)

    rules = []
    for i, r in enumerate(doc["rules"]):
        if not isinstance(r, dict):
            raise DataFormatError(f"rule {i} must be an object")
        rules.append(
            Rule(
                req=to_mask(r.get("req", []), f"rule {i} req"),
                ban=to_mask(r.get("ban", []), f"rule {i} ban"),
                weight=float(r.get("weight", 0.0)),
            )
        )
    rs = RuleSet(m=m, rules=tuple(rules), agent_names=tuple(names) if names else None)
    violations = validate_ruleset(rs)
    if violations:
        raise RuleSetValidationError(violations)
    return rs


def parse_agent(token: str, rs: RuleSet) -> int:
    """Resolve an agent given as an index or a name from the rule set's table."""
    if rs.agent_names is not None and token in rs.agent_names:
        return rs.agent_names.index(token)
    try:
        idx = int(token)
    except ValueError:
        raise DataFormatError(f"unknown agent {token!r}") from None
    if not 0 <= idx < rs.m:
        raise DataFormatError(f"agent index {idx} outside [0, {rs.m})")
    return idx
