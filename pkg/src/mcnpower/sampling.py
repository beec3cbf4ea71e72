"""Monte-Carlo power-index estimation and sample-size bounds.

Randomness contract: all draws come from Philox, a counter-based 64-bit
generator, keyed by ``(seed, stream)``. Sample indices are partitioned
into fixed-size blocks; block ``b`` always uses stream ``b`` and partial
sums are merged in block order, so results depend only on
``(n_samples, seed)`` and are bit-identical for any worker count. Child
seeds (for per-datapoint labeling and similar) are derived with the
splitmix64 finalizer.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ZeroTotalWeightError
from .exact import IndexKind, Method, PowerVector, _first_changer_credits
from .game import Coalition, RuleSet, coalition_value, match_matrix

_MASK64 = (1 << 64) - 1
_BLOCK = 4096


def derive_seed(seed: int, *indices: int) -> int:
    """Derive a child seed by chaining the splitmix64 finalizer."""
    h = _splitmix64(seed & _MASK64)
    for i in indices:
        h = _splitmix64(h ^ (i & _MASK64))
    return h


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def stream_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox generator keyed by (seed, stream); distinct streams never overlap."""
    key = np.array([seed & _MASK64, stream & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class SampleBound:
    """Hoeffding sample-size bound for estimating a [0,1]-bounded mean."""

    epsilon: float
    delta: float
    k_required: int

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "delta": self.delta,
            "k_required": self.k_required,
        }


def hoeffding_samples(epsilon: float, delta: float) -> SampleBound:
    """Trials needed so the empirical mean is within epsilon at confidence 1-delta.

    ``k = ceil(ln(2/delta) / (2 epsilon^2))``, valid for per-trial
    contributions bounded in [0, 1].
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    k = math.ceil(math.log(2.0 / delta) / (2.0 * epsilon * epsilon))
    return SampleBound(epsilon=epsilon, delta=delta, k_required=max(k, 1))


@dataclass(frozen=True)
class McConfig:
    """Estimator configuration. Results depend only on (n_samples, seed)."""

    n_samples: int = 10_000
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")


def is_critical(rs: RuleSet, c: Coalition, agent: int) -> bool:
    """True iff removing the agent changes the coalition's value."""
    bit = 1 << agent
    if not c & bit:
        raise ValueError(f"agent {agent} not in coalition")
    return coalition_value(rs, c) != coalition_value(rs, c & ~bit)


def _random_coalitions(rng: np.random.Generator, count: int, m: int) -> np.ndarray:
    """Uniform coalitions as uint64 bitmasks: one 64-bit word, masked to m bits."""
    halves = rng.integers(0, 1 << 32, size=(count, 2), dtype=np.uint64)
    words = (halves[:, 0] << np.uint64(32)) | halves[:, 1]
    return words & np.uint64((1 << m) - 1)


def _random_permutations(rng: np.random.Generator, count: int, m: int) -> np.ndarray:
    """Uniform agent orderings via Fisher-Yates, vectorized across rows."""
    perm = np.tile(np.arange(m, dtype=np.uint64), (count, 1))
    rows = np.arange(count)
    for i in range(m - 1, 0, -1):
        j = rng.integers(0, i + 1, size=count)
        tmp = perm[rows, i].copy()
        perm[rows, i] = perm[rows, j]
        perm[rows, j] = tmp
    return perm


def _run_blocks(cfg: McConfig, block_fn) -> np.ndarray:
    """Evaluate ``block_fn(block_index, block_size)`` over the fixed block
    partition of the sample range and sum the partials in block order."""
    sizes = []
    remaining = cfg.n_samples
    while remaining > 0:
        sizes.append(min(_BLOCK, remaining))
        remaining -= _BLOCK
    if cfg.workers == 1 or len(sizes) == 1:
        partials = [block_fn(b, size) for b, size in enumerate(sizes)]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            partials = list(pool.map(block_fn, range(len(sizes)), sizes))
    total = partials[0]
    for p in partials[1:]:
        total = total + p
    return total


def mc_banzhaf(rs: RuleSet, cfg: McConfig) -> PowerVector:
    """Sampled weighted Banzhaf estimate.

    Draws coalitions uniformly; each agent accumulates the gross weight of
    rules whose status flips when it leaves the sampled coalition (zero if
    absent). Estimates converge to :func:`mcnpower.exact.exact_alg4_estimand`,
    not to the classical signed index.
    """
    if rs.total_weight == 0.0:
        raise ZeroTotalWeightError("total rule weight is zero")
    req, ban, w = rs.mask_arrays()
    m = rs.m

    def block(b: int, size: int) -> np.ndarray:
        rng = stream_rng(cfg.seed, b)
        masks = _random_coalitions(rng, size, m)
        base = match_matrix(masks, req, ban)
        pivot = np.zeros(m)
        for a in range(m):
            removed = masks & np.uint64(~(1 << a) & _MASK64)
            changed = base != match_matrix(removed, req, ban)
            pivot[a] = (changed.astype(np.float64) @ w).sum()
        return pivot

    totals = _run_blocks(cfg, block)
    values = totals / (cfg.n_samples * rs.total_weight)
    return PowerVector(
        values,
        IndexKind.BANZHAF_ALG4,
        Method.MONTE_CARLO,
        samples=cfg.n_samples,
        seed=cfg.seed,
    )


def mc_shapley(rs: RuleSet, cfg: McConfig) -> PowerVector:
    """Sampled weighted Shapley-Shubik estimate.

    Draws agent orderings uniformly and builds the coalition incrementally;
    per ordering, only the first agent whose arrival changes the coalition
    value is credited with the gross changed weight. Converges to
    :func:`mcnpower.exact.exact_alg5_estimand`.
    """
    if rs.total_weight == 0.0:
        raise ZeroTotalWeightError("total rule weight is zero")
    req, ban, w = rs.mask_arrays()
    m = rs.m

    def block(b: int, size: int) -> np.ndarray:
        rng = stream_rng(cfg.seed, b)
        perms = _random_permutations(rng, size, m)
        return _first_changer_credits(perms, req, ban, w, m)

    totals = _run_blocks(cfg, block)
    values = totals / (cfg.n_samples * rs.total_weight)
    return PowerVector(
        values,
        IndexKind.SHAPLEY_ALG5,
        Method.MONTE_CARLO,
        samples=cfg.n_samples,
        seed=cfg.seed,
    )


def estimate_criticality_probability(
    rs: RuleSet, agent: int, cfg: McConfig
) -> float:
    """Fraction of sampled agent-containing coalitions where the agent is critical.

    Coalitions are drawn uniformly from those containing the agent; the
    count of draws whose value changes on the agent's removal, divided by
    the number of draws, estimates the conditional criticality probability.
    """
    if not 0 <= agent < rs.m:
        raise ValueError(f"agent index {agent} outside [0, {rs.m})")
    req, ban, w = rs.mask_arrays()
    bit = np.uint64(1 << agent)
    notbit = np.uint64(~(1 << agent) & _MASK64)

    def block(b: int, size: int) -> np.ndarray:
        rng = stream_rng(cfg.seed, b)
        masks = _random_coalitions(rng, size, rs.m) | bit
        v_with = match_matrix(masks, req, ban).astype(np.float64) @ w
        v_without = match_matrix(masks & notbit, req, ban).astype(np.float64) @ w
        return np.array([(v_with != v_without).sum()], dtype=np.float64)

    hits = _run_blocks(cfg, block)
    return float(hits[0]) / cfg.n_samples
