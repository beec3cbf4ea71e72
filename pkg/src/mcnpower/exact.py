"""Exhaustive power-index computation on small games.

Four index semantics are exposed as distinct kinds rather than reconciled:

* ``banzhaf_eq1`` — classical Banzhaf: signed marginal value averaged over
  the ``2^(m-1)`` coalitions not containing the agent.
* ``shapley_eq2`` — classical Shapley-Shubik: signed marginal value
  averaged over all ``m!`` agent orderings.
* ``banzhaf_alg4`` — expectation of the weighted sampling estimator: the
  gross weight of rules whose status flips when the agent leaves a
  uniformly random coalition, normalized by total rule weight. Differs
  from ``banzhaf_eq1`` by a factor-of-two membership dilution (the agent
  is absent from half of all coalitions) and by counting gross instead of
  net weight change.
* ``shapley_alg5`` — expectation of the one-credit-per-ordering estimator:
  walking a uniformly random ordering, only the first agent whose arrival
  changes the coalition value is credited, with the gross changed weight,
  again normalized by total rule weight.

These run in ``O(2^m)`` or ``O(m!)`` and are capped accordingly; they are
the ground-truth oracles for the Monte-Carlo estimators in
:mod:`mcnpower.sampling`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DataFormatError, GameSizeError, ZeroTotalWeightError
from .game import RuleSet, match_matrix

SUBSET_ENUM_CAP = 20  # 2^m coalition enumerations
PERM_ENUM_CAP = 10  # m! permutation enumerations

_CHUNK = 1 << 15


class IndexKind(str, Enum):
    BANZHAF_EQ1 = "banzhaf_eq1"
    SHAPLEY_EQ2 = "shapley_eq2"
    BANZHAF_ALG4 = "banzhaf_alg4"
    SHAPLEY_ALG5 = "shapley_alg5"


class Method(str, Enum):
    EXACT = "exact"
    MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class PowerVector:
    """Per-agent index values plus the semantics and method that produced them."""

    values: np.ndarray
    kind: IndexKind
    method: Method
    samples: int | None = None
    seed: int | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64).copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "kind", IndexKind(self.kind))
        object.__setattr__(self, "method", Method(self.method))
        if self.method is Method.EXACT and not (
            self.samples is None and self.seed is None
        ):
            raise ValueError("exact power vectors carry no samples or seed")

    @property
    def m(self) -> int:
        return len(self.values)

    def to_dict(self) -> dict:
        doc = {
            "kind": self.kind.value,
            "method": self.method.value,
            "m": self.m,
            "values": [float(v) for v in self.values],
        }
        if self.samples is not None:
            doc["samples"] = self.samples
        if self.seed is not None:
            doc["seed"] = self.seed
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "PowerVector":
        try:
            pv = cls(
                values=np.array(doc["values"], dtype=np.float64),
                kind=IndexKind(doc["kind"]),
                method=Method(doc["method"]),
                samples=doc.get("samples"),
                seed=doc.get("seed"),
            )
        except (KeyError, ValueError) as e:
            raise DataFormatError(f"bad power-vector document: {e}") from e
        if pv.m != doc.get("m"):
            raise DataFormatError("power-vector 'm' disagrees with values length")
        return pv


def _check_subset_cap(rs: RuleSet, what: str) -> None:
    if rs.m > SUBSET_ENUM_CAP:
        raise GameSizeError(
            f"{what} enumerates 2^m coalitions; m={rs.m} exceeds cap {SUBSET_ENUM_CAP}"
        )


def _check_total_weight(rs: RuleSet) -> float:
    if rs.total_weight == 0.0:
        raise ZeroTotalWeightError(
            "total rule weight is zero; weight-normalized index undefined"
        )
    return rs.total_weight


def all_coalition_values(rs: RuleSet) -> np.ndarray:
    """Value of every coalition, indexed by bitmask (length ``2^m``)."""
    _check_subset_cap(rs, "coalition-value table")
    req, ban, w = rs.mask_arrays()
    out = np.empty(1 << rs.m, dtype=np.float64)
    for lo in range(0, 1 << rs.m, _CHUNK):
        hi = min(lo + _CHUNK, 1 << rs.m)
        masks = np.arange(lo, hi, dtype=np.uint64)
        out[lo:hi] = match_matrix(masks, req, ban).astype(np.float64) @ w
    return out


def _popcounts(n_bits: int) -> np.ndarray:
    """Population count for every mask below ``2^n_bits``."""
    counts = np.zeros(1 << n_bits, dtype=np.int64)
    idx = np.arange(1 << n_bits, dtype=np.int64)
    for b in range(n_bits):
        counts += (idx >> b) & 1
    return counts


def exact_banzhaf_eq1(rs: RuleSet) -> PowerVector:
    """Classical Banzhaf index by full coalition enumeration."""
    _check_subset_cap(rs, "banzhaf_eq1")
    v = all_coalition_values(rs)
    idx = np.arange(1 << rs.m, dtype=np.int64)
    values = np.zeros(rs.m)
    for j in range(rs.m):
        bit = 1 << j
        without = idx[(idx & bit) == 0]
        values[j] = (v[without + bit] - v[without]).sum() / (1 << (rs.m - 1))
    return PowerVector(values, IndexKind.BANZHAF_EQ1, Method.EXACT)


def exact_shapley_eq2(rs: RuleSet) -> PowerVector:
    """Classical Shapley-Shubik index via the subset-weighted form.

    Each coalition ``S`` not containing agent ``j`` contributes its marginal
    ``v(S+j) - v(S)`` with weight ``|S|! (m-1-|S|)! / m!``, which equals the
    average over all ``m!`` orderings without enumerating them; this lifts
    the feasible size from m<=10 to m<=20.
    """
    _check_subset_cap(rs, "shapley_eq2")
    m = rs.m
    v = all_coalition_values(rs)
    pops = _popcounts(m)
    fact = [math.factorial(i) for i in range(m + 1)]
    coef = np.array(
        [fact[s] * fact[m - 1 - s] / fact[m] for s in range(m)], dtype=np.float64
    )
    idx = np.arange(1 << m, dtype=np.int64)
    values = np.zeros(m)
    for j in range(m):
        bit = 1 << j
        without = idx[(idx & bit) == 0]
        marginals = v[without + bit] - v[without]
        values[j] = (coef[pops[without]] * marginals).sum()
    return PowerVector(values, IndexKind.SHAPLEY_EQ2, Method.EXACT)


def exact_alg4_estimand(rs: RuleSet) -> PowerVector:
    """Exact expectation of the weighted coalition-sampling Banzhaf estimator.

    For each agent, averages the gross changed-rule weight between ``C`` and
    ``C`` minus the agent over all ``2^m`` coalitions (zero when the agent is
    absent), then divides by the total rule weight.
    """
    _check_subset_cap(rs, "alg4 estimand")
    total = _check_total_weight(rs)
    req, ban, w = rs.mask_arrays()
    m = rs.m
    acc = np.zeros(m)
    for lo in range(0, 1 << m, _CHUNK):
        hi = min(lo + _CHUNK, 1 << m)
        masks = np.arange(lo, hi, dtype=np.uint64)
        base = match_matrix(masks, req, ban)
        for a in range(m):
            removed = masks & np.uint64(~(1 << a) & 0xFFFFFFFFFFFFFFFF)
            changed = base != match_matrix(removed, req, ban)
            acc[a] += (changed.astype(np.float64) @ w).sum()
    values = acc / ((1 << m) * total)
    return PowerVector(values, IndexKind.BANZHAF_ALG4, Method.EXACT)


def exact_alg5_estimand(rs: RuleSet) -> PowerVector:
    """Exact expectation of the one-credit-per-ordering Shapley estimator.

    Enumerates all ``m!`` orderings; in each, the first agent whose arrival
    changes the running coalition value is credited with the gross changed
    weight at that step, and later value changes in the same ordering earn
    nothing. Credits are averaged and divided by the total rule weight.
    """
    if rs.m > PERM_ENUM_CAP:
        raise GameSizeError(
            f"alg5 estimand enumerates m! orderings; m={rs.m} exceeds cap {PERM_ENUM_CAP}"
        )
    total = _check_total_weight(rs)
    req, ban, w = rs.mask_arrays()
    m = rs.m
    acc = np.zeros(m)
    perm_iter = itertools.permutations(range(m))
    while True:
        chunk = list(itertools.islice(perm_iter, _CHUNK))
        if not chunk:
            break
        perms = np.array(chunk, dtype=np.uint64)
        acc += _first_changer_credits(perms, req, ban, w, m)
    values = acc / (math.factorial(m) * total)
    return PowerVector(values, IndexKind.SHAPLEY_ALG5, Method.EXACT)


def _first_changer_credits(
    perms: np.ndarray,
    req: np.ndarray,
    ban: np.ndarray,
    w: np.ndarray,
    m: int,
) -> np.ndarray:
    """Per-agent gross-weight credits over a batch of agent orderings.

    Shared by the exact enumeration above and the Monte-Carlo estimator:
    each row of ``perms`` is an ordering; the first agent whose arrival
    changes the coalition value collects the gross changed weight.
    """
    n_rows = perms.shape[0]
    bits = np.left_shift(np.uint64(1), perms)
    prefixes = np.bitwise_or.accumulate(bits, axis=1)
    staged = np.concatenate(
        [np.zeros((n_rows, 1), dtype=np.uint64), prefixes], axis=1
    )
    match = match_matrix(staged, req, ban)  # (rows, m+1, n_rules)
    v = match.astype(np.float64) @ w  # (rows, m+1)
    value_changed = v[:, 1:] != v[:, :-1]  # (rows, m)
    has_change = value_changed.any(axis=1)
    first = np.argmax(value_changed, axis=1)
    gross = (match[:, 1:, :] != match[:, :-1, :]).astype(np.float64) @ w
    rows = np.arange(n_rows)
    credited_agent = perms[rows, first].astype(np.int64)
    credit = gross[rows, first]
    return np.bincount(
        credited_agent[has_change], weights=credit[has_change], minlength=m
    )
