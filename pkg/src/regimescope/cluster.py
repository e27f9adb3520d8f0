"""Segment distances, complete-link clustering, volatility-phase labels.

The distance between two segments is the merged-vs-separate maximized
log-likelihood ratio over their sufficient statistics (no additive
constant, so identical segments sit at distance zero).  Complete-link
agglomeration merges the pair of clusters whose farthest members are
closest; cutting the tree yields volatility phases labeled and colored
by rank of mean segment standard deviation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadKError, TooFewSegmentsError
from .stats import GaussianStats, merge_stats

PHASE_LABELS = ("low", "moderate", "high", "extreme")

# Heat-map palette; each volatility class owns a sub-list.
PHASE_COLORS = {
    "low": ("#00008B", "#0000FF"),
    "moderate": ("#00FFFF", "#008000"),
    "high": ("#FFFF00", "#FFA500"),
    "extreme": ("#FF0000",),
}

MAX_DISTANCE = math.inf


@dataclass(frozen=True, eq=False)
class SegmentDistanceMatrix:
    """Symmetric pairwise segment distances with per-segment sigmas."""

    values: np.ndarray
    sigmas: tuple[float, ...]

    @property
    def size(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    count: int


@dataclass(frozen=True)
class Dendrogram:
    """Complete-link merge tree; leaf ids are segment indices (0-based).

    Internal node ids continue from leaf_count in merge order, so merge i
    creates cluster leaf_count + i.
    """

    leaf_count: int
    merges: tuple[Merge, ...]
    leaf_sigmas: tuple[float, ...]


@dataclass(frozen=True)
class ClusterSummary:
    id: int
    mean_sigma: float
    count: int
    label: str
    color: str


@dataclass(frozen=True)
class PhaseAssignment:
    k: int
    cluster_of: tuple[int, ...]
    clusters: tuple[ClusterSummary, ...]


def segment_distance(
    a: GaussianStats, b: GaussianStats, variance_floor_ratio: float = 1e-12
) -> float:
    """Statistical distance between two segments from sufficient statistics.

    d = (n_a + n_b) log sigma_pooled - n_a log sigma_a - n_b log sigma_b,
    pooling by sufficient statistics (the pooled MLE variance includes the
    between-means term).  Both-degenerate pairs are distance 0 when the
    means agree and MAX_DISTANCE when they do not.
    """
    if a.n < 1 or b.n < 1:
        raise ValueError("segment distance requires n >= 1 on both sides")
    pooled = merge_stats(a, b)
    if a.variance <= 0.0 and b.variance <= 0.0:
        return 0.0 if a.mean == b.mean else MAX_DISTANCE
    if pooled.variance <= 0.0:
        return 0.0
    floor = variance_floor_ratio * pooled.variance
    va = max(a.variance, floor)
    vb = max(b.variance, floor)
    d = 0.5 * (
        pooled.n * math.log(pooled.variance)
        - a.n * math.log(va)
        - b.n * math.log(vb)
    )
    return max(d, 0.0)


def build_distance_matrix(
    segment_stats, variance_floor_ratio: float = 1e-12
) -> SegmentDistanceMatrix:
    stats = list(segment_stats)
    m = len(stats)
    d = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            d[i, j] = d[j, i] = segment_distance(
                stats[i], stats[j], variance_floor_ratio
            )
    return SegmentDistanceMatrix(
        values=d, sigmas=tuple(s.sigma for s in stats)
    )


def complete_link(dm: SegmentDistanceMatrix) -> Dendrogram:
    """Agglomerative clustering with maximum inter-cluster distance.

    Ties are broken by the lexicographically smallest (i, j) cluster-id
    pair, which makes the tree deterministic.
    """
    m = dm.size
    if m < 2:
        raise TooFewSegmentsError("clustering needs at least 2 segments")

    dist: dict[tuple[int, int], float] = {}
    for i in range(m):
        for j in range(i + 1, m):
            dist[(i, j)] = float(dm.values[i, j])
    active = list(range(m))
    counts = {i: 1 for i in range(m)}
    merges: list[Merge] = []

    next_id = m
    while len(active) > 1:
        best = None
        for ai in range(len(active)):
            for aj in range(ai + 1, len(active)):
                i, j = active[ai], active[aj]
                key = (i, j) if i < j else (j, i)
                d = dist[key]
                if best is None or d < best[0] or (d == best[0] and key < best[1]):
                    best = (d, key)
        d, (i, j) = best
        merges.append(Merge(left=i, right=j, height=d, count=counts[i] + counts[j]))
        new = next_id
        next_id += 1
        for other in active:
            if other in (i, j):
                continue
            ki = (min(i, other), max(i, other))
            kj = (min(j, other), max(j, other))
            dist[(other, new) if other < new else (new, other)] = max(
                dist[ki], dist[kj]
            )
        counts[new] = counts[i] + counts[j]
        active = [x for x in active if x not in (i, j)] + [new]

    return Dendrogram(
        leaf_count=m, merges=tuple(merges), leaf_sigmas=dm.sigmas
    )


def _rank_to_class(rank: int, k: int) -> int:
    # Ranks spread across the four classes proportionally; top rank is the
    # highest class available, all four classes populated once k >= 4.
    return (4 * rank) // k


def cut_tree(tree: Dendrogram, k: int) -> PhaseAssignment:
    """Cut the dendrogram into k clusters and label them by volatility rank.

    Removing the k-1 highest merges (the last k-1, since complete-link
    heights never invert) leaves k connected components.  Cluster ids are
    assigned in ascending order of mean member sigma, so id 0 is always the
    calmest phase.
    """
    m = tree.leaf_count
    if not 2 <= k <= m:
        raise BadKError(f"k={k} outside [2, {m}]")

    parent = list(range(m + len(tree.merges)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for idx, mg in enumerate(tree.merges[: m - k]):
        node = m + idx
        parent[find(mg.left)] = node
        parent[find(mg.right)] = node

    roots: dict[int, list[int]] = {}
    for leaf in range(m):
        roots.setdefault(find(leaf), []).append(leaf)

    groups = sorted(
        roots.values(),
        key=lambda members: (
            float(np.mean([tree.leaf_sigmas[i] for i in members])),
            members[0],
        ),
    )

    cluster_of = [0] * m
    clusters = []
    class_members: dict[int, int] = {}
    for cid, members in enumerate(groups):
        for leaf in members:
            cluster_of[leaf] = cid
        cls = _rank_to_class(cid, k)
        label = PHASE_LABELS[cls]
        pos = class_members.get(cls, 0)
        class_members[cls] = pos + 1
        palette = PHASE_COLORS[label]
        color = palette[min(pos, len(palette) - 1)]
        clusters.append(
            ClusterSummary(
                id=cid,
                mean_sigma=float(np.mean([tree.leaf_sigmas[i] for i in members])),
                count=len(members),
                label=label,
                color=color,
            )
        )

    return PhaseAssignment(
        k=k, cluster_of=tuple(cluster_of), clusters=tuple(clusters)
    )


def to_newick(tree: Dendrogram) -> str:
    """Ultrametric Newick string; branch length = parent height - node height."""
    heights = {i: 0.0 for i in range(tree.leaf_count)}
    nodes = {i: f"s{i}" for i in range(tree.leaf_count)}
    for idx, mg in enumerate(tree.merges):
        node_id = tree.leaf_count + idx
        heights[node_id] = mg.height
        left = f"{nodes[mg.left]}:{mg.height - heights[mg.left]!r}"
        right = f"{nodes[mg.right]}:{mg.height - heights[mg.right]!r}"
        nodes[node_id] = f"({left},{right})"
    root = tree.leaf_count + len(tree.merges) - 1
    return nodes[root] + ";"


# ---------------------------------------------------------------------------
# JSON codecs

DENDROGRAM_SCHEMA = "regimescope.dendrogram/1"
PHASES_SCHEMA = "regimescope.phases/1"


def dendrogram_to_dict(tree: Dendrogram) -> dict:
    return {
        "schema": DENDROGRAM_SCHEMA,
        "leaf_count": tree.leaf_count,
        "leaf_sigmas": list(tree.leaf_sigmas),
        "merges": [
            {"left": m.left, "right": m.right, "height": m.height, "count": m.count}
            for m in tree.merges
        ],
    }


def dendrogram_from_dict(doc: dict) -> Dendrogram:
    if doc.get("schema") != DENDROGRAM_SCHEMA:
        raise ValueError(f"unsupported dendrogram schema {doc.get('schema')!r}")
    return Dendrogram(
        leaf_count=doc["leaf_count"],
        leaf_sigmas=tuple(doc["leaf_sigmas"]),
        merges=tuple(
            Merge(
                left=m["left"],
                right=m["right"],
                height=m["height"],
                count=m["count"],
            )
            for m in doc["merges"]
        ),
    )


def phases_to_dict(phases: PhaseAssignment) -> dict:
    return {
        "schema": PHASES_SCHEMA,
        "k": phases.k,
        "cluster_of": list(phases.cluster_of),
        "clusters": [
            {
                "id": c.id,
                "mean_sigma": c.mean_sigma,
                "count": c.count,
                "label": c.label,
                "color": c.color,
            }
            for c in phases.clusters
        ],
    }


def phases_from_dict(doc: dict) -> PhaseAssignment:
    if doc.get("schema") != PHASES_SCHEMA:
        raise ValueError(f"unsupported phases schema {doc.get('schema')!r}")
    return PhaseAssignment(
        k=doc["k"],
        cluster_of=tuple(doc["cluster_of"]),
        clusters=tuple(
            ClusterSummary(
                id=c["id"],
                mean_sigma=c["mean_sigma"],
                count=c["count"],
                label=c["label"],
                color=c["color"],
            )
            for c in doc["clusters"]
        ),
    )
