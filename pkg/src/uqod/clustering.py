"""Density clustering of repeated detections.

Groups the detections a stochastic detector emits for one image across its
forward passes, so that each group can be read as "the same object, seen T
times". The pipeline is hierarchical density clustering over raw box corners:

1. feature = (x1, y1, x2, y2) per detection, Euclidean metric;
2. core distances from the k-th nearest neighbour (the point itself counts
   as the first);
3. mutual-reachability graph, minimum spanning tree, single-linkage merge
   hierarchy;
4. hierarchy condensed by ``min_cluster_size``, flat clusters picked by
   excess-of-mass stability.

Detections that land in no stable group come back as noise and are excluded
from every downstream aggregate.

The whole chain is deterministic: ties in the spanning tree and in the merge
order are broken by (lower index, lower index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .types import BoundingBox, Detection, PredictionDump, SoftmaxScore


@dataclass(frozen=True)
class ClusterParams:
    """Knobs of the density hierarchy.

    ``min_samples`` sets how many neighbours define a point's local density;
    ``min_cluster_size`` is the smallest group that counts as a cluster.
    """

    min_samples: int = 3
    min_cluster_size: int = 3

    def __post_init__(self):
        if self.min_samples < 1:
            raise ValueError(f"min_samples must be >= 1 (got {self.min_samples})")
        if self.min_cluster_size < 2:
            raise ValueError(f"min_cluster_size must be >= 2 (got {self.min_cluster_size})")


@dataclass(frozen=True)
class DetectionCluster:
    """A group of detections treated as repeated sightings of one object."""

    members: tuple[Detection, ...]

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def boxes(self) -> tuple[BoundingBox, ...]:
        return tuple(d.box for d in self.members)

    @property
    def softmaxes(self) -> tuple[SoftmaxScore, ...]:
        return tuple(d.score for d in self.members)


def feature_vector(detection: Detection) -> np.ndarray:
    """Raw box corners as the clustering feature (no normalisation)."""
    return np.asarray(detection.box.as_tuple(), dtype=float)


def _feature_matrix(detections) -> np.ndarray:
    if not detections:
        return np.empty((0, 4), dtype=float)
    return np.asarray([d.box.as_tuple() for d in detections], dtype=float)


def _pairwise_distances(feats: np.ndarray) -> np.ndarray:
    diff = feats[:, None, :] - feats[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=-1))
    np.fill_diagonal(dist, 0.0)
    return dist


def core_distance(point: np.ndarray, all_points: np.ndarray, k: int) -> float:
    """Distance from ``point`` to its k-th nearest neighbour among ``all_points``.

    ``point`` is expected to be one of ``all_points`` and counts as its own
    first neighbour, so k = 1 gives 0 for any member point.
    """
    pts = np.asarray(all_points, dtype=float)
    if k < 1 or k > len(pts):
        raise ValueError(f"k={k} outside [1, {len(pts)}]")
    d = np.sqrt(((pts - np.asarray(point, dtype=float)) ** 2).sum(axis=1))
    return float(np.sort(d)[k - 1])


def mutual_reachability(a: np.ndarray, b: np.ndarray, all_points: np.ndarray, k: int) -> float:
    """max(core(a), core(b), euclidean(a, b)); symmetric by construction."""
    da = core_distance(a, all_points, k)
    db = core_distance(b, all_points, k)
    ab = float(np.sqrt(((np.asarray(a, float) - np.asarray(b, float)) ** 2).sum()))
    return max(da, db, ab)


def _core_distances(dist: np.ndarray, k: int) -> np.ndarray:
    # row-wise k-th smallest; the zero on the diagonal is the self neighbour
    return np.sort(dist, axis=1)[:, k - 1]


def _mutual_reachability_matrix(dist: np.ndarray, core: np.ndarray) -> np.ndarray:
    mr = np.maximum(dist, np.maximum(core[:, None], core[None, :]))
    np.fill_diagonal(mr, 0.0)
    return mr


def _prim_mst(weights: np.ndarray) -> list[tuple[float, int, int]]:
    """MST of a dense graph; ties fall to the lowest vertex index.

    Returns edges as (weight, u, v) with u < v.
    """
    n = weights.shape[0]
    best = weights[0].copy()
    source = np.zeros(n, dtype=int)
    best[0] = np.inf
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    edges: list[tuple[float, int, int]] = []
    for _ in range(n - 1):
        v = int(np.argmin(best))  # argmin returns the first minimum: lowest index wins
        u = int(source[v])
        edges.append((float(best[v]), min(u, v), max(u, v)))
        in_tree[v] = True
        best[v] = np.inf
        improved = (weights[v] < best) & ~in_tree
        best[improved] = weights[v][improved]
        source[improved] = v
    return edges


def _single_linkage(edges: list[tuple[float, int, int]], n: int) -> np.ndarray:
    """Merge hierarchy from MST edges, scipy-style.

    Row i of the result is (left_node, right_node, distance, size); the merge
    creates node n + i. Equal-weight edges merge in (weight, u, v) order.
    """
    merges = np.empty((n - 1, 4), dtype=float)
    parent = np.arange(2 * n - 1)
    size = np.ones(2 * n - 1)

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    for i, (w, u, v) in enumerate(sorted(edges)):
        ru, rv = find(u), find(v)
        new = n + i
        parent[ru] = new
        parent[rv] = new
        size[new] = size[ru] + size[rv]
        merges[i] = (ru, rv, w, size[new])
    return merges


def _condense(merges: np.ndarray, n: int, min_cluster_size: int):
    """Condensed tree rows (parent, child, lam, size).

    Cluster labels start at n (the root); children smaller than
    ``min_cluster_size`` fall out of their parent as single points at the
    lambda (= 1/distance) of the split, larger one-sided survivors keep the
    parent's label.
    """

    def node_size(node: int) -> int:
        return 1 if node < n else int(merges[node - n, 3])

    def points_under(node: int):
        stack = [node]
        out = []
        while stack:
            cur = stack.pop()
            if cur < n:
                out.append(cur)
            else:
                row = merges[cur - n]
                stack.append(int(row[0]))
                stack.append(int(row[1]))
        return out

    root = 2 * n - 2
    rows: list[tuple[int, int, float, int]] = []
    relabel = {root: n}
    next_label = n + 1
    stack = [root]
    while stack:
        node = stack.pop()
        left, right, dist, _ = merges[node - n]
        left, right = int(left), int(right)
        lam = 1.0 / dist if dist > 0.0 else math.inf
        label = relabel[node]
        sizes = (node_size(left), node_size(right))
        if sizes[0] >= min_cluster_size and sizes[1] >= min_cluster_size:
            for child, child_size in zip((left, right), sizes):
                relabel[child] = next_label
                rows.append((label, next_label, lam, child_size))
                next_label += 1
                stack.append(child)  # both sides >= 2, so both are merge nodes
        else:
            for child, child_size in zip((left, right), sizes):
                if child_size >= min_cluster_size:
                    relabel[child] = label
                    stack.append(child)
                else:
                    for pt in points_under(child):
                        rows.append((label, pt, lam, 1))
    return rows


def _stabilities(rows, n: int) -> dict[int, float]:
    birth: dict[int, float] = {n: 0.0}
    for parent, child, lam, _ in rows:
        if child >= n:
            birth[child] = lam
    stab: dict[int, float] = {c: 0.0 for c in birth}
    for parent, child, lam, size in rows:
        delta = lam - birth[parent]
        if math.isinf(lam) and math.isinf(birth[parent]):
            delta = 0.0  # zero-diameter split: no excess mass either way
        stab[parent] += delta * size
    return stab


def _select_eom(rows, stab: dict[int, float], n: int) -> set[int]:
    """Excess-of-mass cluster selection over the condensed tree.

    The root is an eligible candidate, so an image whose detections form one
    tight blob yields one cluster instead of all-noise; undersized root
    selections are filtered to noise by the caller.
    """
    children: dict[int, list[int]] = {c: [] for c in stab}
    for parent, child, _, _ in rows:
        if child >= n:
            children[parent].append(child)
    chosen: dict[int, set[int]] = {}
    score: dict[int, float] = {}
    for c in sorted(stab, reverse=True):  # labels increase downward: leaves first
        kids = children[c]
        kid_score = sum(score[k] for k in kids)
        if not kids or stab[c] >= kid_score:
            score[c] = stab[c]
            chosen[c] = {c}
        else:
            score[c] = kid_score
            chosen[c] = set().union(*(chosen[k] for k in kids))
    return chosen[n]


def _flat_labels(rows, selected: set[int], n: int, min_cluster_size: int) -> np.ndarray:
    parent_of: dict[int, int] = {}
    leaf_parent: dict[int, int] = {}
    for parent, child, _, _ in rows:
        if child >= n:
            parent_of[child] = parent
        else:
            leaf_parent[child] = parent
    labels = np.full(n, -1, dtype=int)
    for pt, cluster in leaf_parent.items():
        cur: int | None = cluster
        while cur is not None:
            if cur in selected:
                labels[pt] = cur
                break
            cur = parent_of.get(cur)
    for cluster in selected:
        members = np.flatnonzero(labels == cluster)
        if 0 < len(members) < min_cluster_size:
            labels[members] = -1
    return labels


def cluster_detections(
    dump: PredictionDump, params: ClusterParams | None = None
) -> tuple[list[DetectionCluster], list[Detection]]:
    """Partition a dump's detections into clusters and noise.

    Every detection lands in exactly one cluster or in the noise list; noise
    keeps the original dump order, clusters are ordered by their earliest
    member.
    """
    params = params or ClusterParams()
    dets = list(dump.detections)
    n = len(dets)
    if n == 0:
        return [], []
    if n < params.min_cluster_size or n < params.min_samples:
        return [], dets

    feats = _feature_matrix(dets)
    dist = _pairwise_distances(feats)
    core = _core_distances(dist, params.min_samples)
    mreach = _mutual_reachability_matrix(dist, core)
    edges = _prim_mst(mreach)
    merges = _single_linkage(edges, n)
    rows = _condense(merges, n, params.min_cluster_size)
    stab = _stabilities(rows, n)
    selected = _select_eom(rows, stab, n)
    labels = _flat_labels(rows, selected, n, params.min_cluster_size)

    by_label: dict[int, list[int]] = {}
    for idx, lab in enumerate(labels):
        if lab >= 0:
            by_label.setdefault(int(lab), []).append(idx)
    groups = sorted(by_label.values(), key=lambda idxs: idxs[0])
    clusters = [DetectionCluster(tuple(dets[i] for i in idxs)) for idxs in groups]
    noise = [dets[i] for i in range(n) if labels[i] < 0]
    return clusters, noise


def mst_total_weight(feats: np.ndarray, min_samples: int) -> float:
    """Total mutual-reachability MST weight; exposed for verification."""
    feats = np.asarray(feats, dtype=float)
    if len(feats) < 2:
        return 0.0
    if min_samples > len(feats):
        raise ValueError(f"min_samples={min_samples} exceeds point count {len(feats)}")
    dist = _pairwise_distances(feats)
    core = _core_distances(dist, min_samples)
    mreach = _mutual_reachability_matrix(dist, core)
    return float(sum(w for w, _, _ in _prim_mst(mreach)))
