"""Agent co-occurrence graphs, structural metrics, and correlation reports.

Each rule set induces two undirected graphs on the agents: one connecting
agents that appear together in some rule's required set, one for the
banned sets. The metrics computed here (exact maximum clique, degree
statistics, mean local clustering, peak shortest-path betweenness) are
correlated datapoint-by-datapoint against summary statistics of the
per-agent power labels, keeping pairs with Spearman ``|rho| > 0.2`` and
``p <= 0.05``, and the share of datasets in which each pair survives is
tabulated.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy import stats as _scipy_stats

from .datagen import LabeledDataset, decode_rulesets
from .game import RuleSet

RHO_THRESHOLD = 0.2
P_THRESHOLD = 0.05

GRAPH_STAT_NAMES = (
    "max_clique",
    "avg_degree",
    "degree_variance",
    "avg_clustering",
    "max_betweenness",
)
BANZHAF_STAT_NAMES = ("mean", "variance", "gini")


@dataclass(frozen=True)
class AgentGraph:
    """Undirected simple graph over agents 0..m-1."""

    m: int
    edges: frozenset[tuple[int, int]]  # (i, j) with i < j
    kind: str  # "req" or "ban"


@dataclass(frozen=True)
class GraphMetrics:
    max_clique: int
    avg_degree: float
    degree_variance: float
    avg_clustering: float
    max_betweenness: float

    def to_dict(self) -> dict:
        return {
            "max_clique": float(self.max_clique),
            "avg_degree": self.avg_degree,
            "degree_variance": self.degree_variance,
            "avg_clustering": self.avg_clustering,
            "max_betweenness": self.max_betweenness,
        }


@dataclass(frozen=True)
class CorrelationRecord:
    """Spearman result for one (label statistic, graph statistic) pair."""

    dataset: int
    banzhaf_stat: str
    graph_kind: str
    graph_stat: str
    rho: float | None
    p_value: float | None
    significant: bool
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "banzhaf_stat": self.banzhaf_stat,
            "graph_kind": self.graph_kind,
            "graph_stat": self.graph_stat,
            "rho": self.rho,
            "p_value": self.p_value,
            "significant": self.significant,
            "error": self.error,
        }


def build_graph(rs: RuleSet, kind: str) -> AgentGraph:
    """Connect agents that co-occur in some rule's mask of the chosen kind.

    The result depends only on the rule masks, never on rule order or
    weights.
    """
    if kind not in ("req", "ban"):
        raise ValueError(f"graph kind must be 'req' or 'ban', got {kind!r}")
    edges = set()
    for rule in rs.rules:
        mask = rule.req if kind == "req" else rule.ban
        members = []
        a = 0
        while mask:
            if mask & 1:
                members.append(a)
            mask >>= 1
            a += 1
        for i_pos in range(len(members)):
            for j_pos in range(i_pos + 1, len(members)):
                edges.add((members[i_pos], members[j_pos]))
    return AgentGraph(m=rs.m, edges=frozenset(edges), kind=kind)


def _adjacency_masks(g: AgentGraph) -> list[int]:
    adj = [0] * g.m
    for i, j in g.edges:
        adj[i] |= 1 << j
        adj[j] |= 1 << i
    return adj


def _max_clique(adj: list[int], m: int) -> int:
    """Exact maximum clique size via Bron-Kerbosch with pivoting."""
    best = 1 if m >= 1 else 0

    def expand(size: int, candidates: int, excluded: int) -> None:
        nonlocal best
        if candidates == 0 and excluded == 0:
            best = max(best, size)
            return
        if size + candidates.bit_count() <= best:
            return
        pivot_pool = candidates | excluded
        pivot = -1
        pivot_deg = -1
        pool = pivot_pool
        while pool:
            u = (pool & -pool).bit_length() - 1
            deg = (candidates & adj[u]).bit_count()
            if deg > pivot_deg:
                pivot, pivot_deg = u, deg
            pool &= pool - 1
        rest = candidates & ~adj[pivot]
        while rest:
            v = (rest & -rest).bit_length() - 1
            bit = 1 << v
            expand(size + 1, candidates & adj[v], excluded & adj[v])
            candidates &= ~bit
            excluded |= bit
            rest &= rest - 1

    if m >= 1:
        expand(0, (1 << m) - 1, 0)
    return best


def _betweenness(adj_sets: list[set[int]], m: int) -> list[float]:
    """Node betweenness via breadth-first search from every source.

    Unnormalized: each unordered endpoint pair contributes once, splitting
    credit evenly across its equal-length shortest paths.
    """
    centrality = [0.0] * m
    for source in range(m):
        stack = []
        preds: list[list[int]] = [[] for _ in range(m)]
        sigma = [0.0] * m
        sigma[source] = 1.0
        dist = [-1] * m
        dist[source] = 0
        queue = deque([source])
        while queue:
            v = queue.popleft()
            stack.append(v)
            for w in adj_sets[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        dependency = [0.0] * m
        while stack:
            w = stack.pop()
            for v in preds[w]:
                dependency[v] += sigma[v] / sigma[w] * (1.0 + dependency[w])
            if w != source:
                centrality[w] += dependency[w]
    # undirected traversal visits every endpoint pair from both sides
    return [c / 2.0 for c in centrality]


def graph_metrics(g: AgentGraph) -> GraphMetrics:
    """All structural metrics for one agent graph."""
    m = g.m
    if m < 1:
        raise ValueError("graph needs at least one node")
    adj_sets: list[set[int]] = [set() for _ in range(m)]
    for i, j in g.edges:
        adj_sets[i].add(j)
        adj_sets[j].add(i)
    degrees = np.array([len(s) for s in adj_sets], dtype=np.float64)

    clustering = 0.0
    for v in range(m):
        deg = len(adj_sets[v])
        if deg < 2:
            continue
        neighbors = list(adj_sets[v])
        links = sum(
            1
            for i_pos in range(len(neighbors))
            for j_pos in range(i_pos + 1, len(neighbors))
            if neighbors[j_pos] in adj_sets[neighbors[i_pos]]
        )
        clustering += 2.0 * links / (deg * (deg - 1))

    return GraphMetrics(
        max_clique=_max_clique(_adjacency_masks(g), m),
        avg_degree=float(2.0 * len(g.edges) / m),
        degree_variance=float(degrees.var()),
        avg_clustering=clustering / m,
        max_betweenness=max(_betweenness(adj_sets, m)) if m else 0.0,
    )


def banzhaf_stats(values: np.ndarray) -> dict:
    """Mean, population variance, and Gini coefficient of a label vector."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("empty value array")
    mean = float(values.mean())
    variance = float(values.var())
    if mean <= 0.0:
        raise ValueError(f"gini undefined for mean {mean} <= 0")
    pairwise = np.abs(values[:, None] - values[None, :]).sum()
    gini = float(pairwise / (2.0 * values.size**2 * mean))
    return {"mean": mean, "variance": variance, "gini": gini}


def spearman(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Spearman rank correlation with a two-sided t-approximation p-value."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be equal-length 1-d arrays")
    n = x.size
    if n < 3:
        raise ValueError(f"need at least 3 observations, got {n}")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ValueError("correlation undefined for constant input")
    rx = _average_ranks(x)
    ry = _average_ranks(y)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    rho = float((rx * ry).sum() / math.sqrt((rx * rx).sum() * (ry * ry).sum()))
    rho = max(-1.0, min(1.0, rho))
    if abs(rho) == 1.0:
        return rho, 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    p = 2.0 * float(_scipy_stats.t.sf(abs(t), df=n - 2))
    return rho, p


def _average_ranks(a: np.ndarray) -> np.ndarray:
    order = np.argsort(a, kind="stable")
    ranks = np.empty(a.size, dtype=np.float64)
    sorted_a = a[order]
    i = 0
    while i < a.size:
        j = i
        while j + 1 < a.size and sorted_a[j + 1] == sorted_a[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def dataset_statistics(ds: LabeledDataset) -> dict:
    """Per-datapoint graph metrics and label statistics for one dataset.

    Returns arrays keyed by series name; label-statistic entries may hold
    None where undefined (e.g. Gini of an all-zero label row).
    """
    if ds.labels is None:
        raise ValueError("dataset has no labels to correlate against")
    rulesets = decode_rulesets(ds)
    series: dict[str, list] = {}
    for kind in ("req", "ban"):
        for stat in GRAPH_STAT_NAMES:
            series[f"{kind}.{stat}"] = []
    for stat in BANZHAF_STAT_NAMES:
        series[f"banzhaf.{stat}"] = []
    for i, rs in enumerate(rulesets):
        for kind in ("req", "ban"):
            metrics = graph_metrics(build_graph(rs, kind)).to_dict()
            for stat in GRAPH_STAT_NAMES:
                series[f"{kind}.{stat}"].append(metrics[stat])
        row = ds.labels[i]
        try:
            stats = banzhaf_stats(row)
        except ValueError:
            stats = {
                "mean": float(np.mean(row)),
                "variance": float(np.var(row)),
                "gini": None,
            }
        for stat in BANZHAF_STAT_NAMES:
            series[f"banzhaf.{stat}"].append(stats[stat])
    return series


def correlation_report(
    datasets: list[LabeledDataset],
) -> tuple[list[CorrelationRecord], list[dict]]:
    """Correlation records for every dataset and the cross-dataset prevalence table.

    Prevalence rows give, for each (label statistic, graph statistic) pair,
    the percentage of datasets in which the pair was significant, sorted
    descending.
    """
    records = []
    significant_counts: dict[tuple[str, str, str], int] = {}
    for d_idx, ds in enumerate(datasets):
        series = dataset_statistics(ds)
        for bstat in BANZHAF_STAT_NAMES:
            bvals = series[f"banzhaf.{bstat}"]
            for kind in ("req", "ban"):
                for gstat in GRAPH_STAT_NAMES:
                    key = (bstat, kind, gstat)
                    significant_counts.setdefault(key, 0)
                    gvals = series[f"{kind}.{gstat}"]
                    if any(v is None for v in bvals):
                        records.append(
                            CorrelationRecord(
                                d_idx, bstat, kind, gstat, None, None, False,
                                error=f"{bstat} undefined for some datapoints",
                            )
                        )
                        continue
                    try:
                        rho, p = spearman(np.array(bvals), np.array(gvals))
                    except ValueError as e:
                        records.append(
                            CorrelationRecord(
                                d_idx, bstat, kind, gstat, None, None, False,
                                error=str(e),
                            )
                        )
                        continue
                    significant = abs(rho) > RHO_THRESHOLD and p <= P_THRESHOLD
                    if significant:
                        significant_counts[key] += 1
                    records.append(
                        CorrelationRecord(d_idx, bstat, kind, gstat, rho, p, significant)
                    )
    prevalence = [
        {
            "banzhaf_stat": bstat,
            "graph_stat": f"{gstat} of {kind}",
            "percent_significant": 100.0 * count / len(datasets),
        }
        for (bstat, kind, gstat), count in significant_counts.items()
    ]
    prevalence.sort(key=lambda row: (-row["percent_significant"], row["banzhaf_stat"], row["graph_stat"]))
    return records, prevalence
