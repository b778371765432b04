"""Stage I: k-means over the fused features of both graphs and
per-cluster quota sampling of seed pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .similarity import SeedPair, SeedSet, add_pairs, uvp_seeds


@dataclass(frozen=True)
class ClusterAssignment:
    """Cluster labels over the concatenation [entities of G1; entities of G2].

    n_first is the size of the G1 block (labels[:n_first] belong to G1).
    """

    k: int
    labels: np.ndarray
    centroids: np.ndarray
    n_first: int

    def save(self, path) -> None:
        with open(path, "w") as fh:
            for idx, lab in enumerate(self.labels):
                fh.write(f"{idx} {int(lab)}\n")


@dataclass(frozen=True)
class ClusterQuota:
    targets: np.ndarray  # per-cluster pair counts
    n: int


def _rng(seed: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tags))


def _kmeanspp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[c] = points[idx]
        d2 = np.minimum(d2, ((points - centers[c]) ** 2).sum(axis=1))
    return centers


def kmeans(points: np.ndarray, k: int, max_iter: int = 100,
           rng_seed: int = 42, n_first: int | None = None) -> ClusterAssignment:
    """Lloyd iterations with k-means++ initialization.

    Deterministic given rng_seed; stops when no label changes or max_iter
    is reached. An empty cluster is repaired by reseeding it with the
    point farthest from its assigned centroid (ties to the lower index).
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if k < 1:
        raise ConfigError("k must be >= 1")
    if k > n:
        raise DataError(f"k={k} exceeds {n} points")
    rng = _rng(rng_seed, 0)
    centers = _kmeanspp_init(points, k, rng)
    labels = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iter):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(d2, axis=1)
        # repair empties: steal the globally farthest point
        for cid in range(k):
            while not (new_labels == cid).any():
                dist_own = d2[np.arange(n), new_labels]
                donors = np.array([np.sum(new_labels == new_labels[i]) > 1
                                   for i in range(n)])
                cand = np.where(donors)[0]
                if cand.size == 0:
                    break
                far = cand[int(np.argmax(dist_own[cand]))]
                new_labels[far] = cid
                centers[cid] = points[far]
                d2[:, cid] = ((points - centers[cid]) ** 2).sum(axis=1)
        if (new_labels == labels).all():
            break
        labels = new_labels
        for cid in range(k):
            mask = labels == cid
            if mask.any():
                centers[cid] = points[mask].mean(axis=0)
    nf = n if n_first is None else n_first
    return ClusterAssignment(k=k, labels=labels, centroids=centers, n_first=nf)


def kmeans_objective(points: np.ndarray, assignment: ClusterAssignment) -> float:
    diff = points - assignment.centroids[assignment.labels]
    return float((diff ** 2).sum())


def silhouette_score(points: np.ndarray, labels: np.ndarray, block: int = 512) -> float:
    """Mean silhouette over all points (exact, computed in row blocks).

    Points in singleton clusters score 0, as do points with zero mean
    distances (degenerate duplicates).
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    ks = np.unique(labels)
    if len(ks) < 2:
        return 0.0
    onehot = (labels[:, None] == ks[None, :]).astype(np.float64)
    sizes = onehot.sum(axis=0)
    sq = (points ** 2).sum(axis=1)
    scores = np.empty(n)
    for start in range(0, n, block):
        stop = min(start + block, n)
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * points[start:stop] @ points.T
        d = np.sqrt(np.maximum(d2, 0.0))
        sums = d @ onehot  # (block, n_clusters) total distance to each cluster
        rows = np.arange(stop - start)
        own = np.searchsorted(ks, labels[start:stop])
        own_sizes = sizes[own]
        a = sums[rows, own] / np.maximum(own_sizes - 1, 1)  # self-distance is 0
        means = sums / sizes[None, :]
        means[rows, own] = np.inf
        b = means.min(axis=1)
        denom = np.maximum(a, b)
        s = np.where(denom > 0.0, (b - a) / np.where(denom > 0.0, denom, 1.0), 0.0)
        s = np.where(own_sizes <= 1, 0.0, s)
        scores[start:stop] = s
    return float(scores.mean())


def select_k(points: np.ndarray, k_range: tuple[int, int] = (2, 5),
             rng_seed: int = 42) -> int:
    """Pick the cluster count in k_range with the best mean silhouette.

    Ties go to the smaller k.
    """
    lo, hi = k_range
    if lo < 2 or hi > 5 or lo > hi:
        raise ConfigError(f"k_range must lie within [2, 5], got {k_range}")
    if points.shape[0] < 5:
        raise DataError(f"need at least 5 points to select k, got {points.shape[0]}")
    best_k, best_score = lo, -np.inf
    for k in range(lo, hi + 1):
        assignment = kmeans(points, k, rng_seed=_seed_for_k(rng_seed, k))
        score = silhouette_score(points, assignment.labels)
        if score > best_score:
            best_k, best_score = k, score
    return best_k


def _seed_for_k(rng_seed: int, k: int) -> int:
    # stable per-k stream so select_k and a later kmeans(k) agree
    return rng_seed * 101 + k


def choose_and_cluster(points: np.ndarray, k_range: tuple[int, int],
                       rng_seed: int, n_first: int) -> ClusterAssignment:
    """select_k followed by kmeans at the chosen k, on the same stream."""
    k = select_k(points, k_range, rng_seed)
    return kmeans(points, k, rng_seed=_seed_for_k(rng_seed, k), n_first=n_first)


def cluster_quota(assignment: ClusterAssignment, n: int) -> ClusterQuota:
    """Apportion n pairs across clusters proportionally to cluster size.

    Floor rule plus remainder: m_j = floor(|C_j| * n / total), with the
    remainder given one each to clusters in descending size (ties to the
    lower cluster id). Each target is finally clamped to the number of
    feasible cross-graph pairs in that cluster.
    """
    if n < 0:
        raise ConfigError("quota n must be >= 0")
    labels = assignment.labels
    total = labels.size
    k = assignment.k
    sizes = np.array([(labels == j).sum() for j in range(k)], dtype=np.int64)
    targets = (sizes * n) // total
    remainder = n - int(targets.sum())
    if remainder > 0:
        order = sorted(range(k), key=lambda j: (-sizes[j], j))
        for j in order[:remainder]:
            targets[j] += 1
    part1 = labels[:assignment.n_first]
    part2 = labels[assignment.n_first:]
    feasible = np.array([min((part1 == j).sum(), (part2 == j).sum())
                         for j in range(k)], dtype=np.int64)
    return ClusterQuota(targets=np.minimum(targets, feasible), n=n)


def stage1_sample(kg1, kg2, sim: np.ndarray, assignment: ClusterAssignment,
                  quota: ClusterQuota, existing: SeedSet) -> SeedSet:
    """Greedy per-cluster sampling of quota.targets[j] pairs each.

    Within cluster j the global similarity matrix is restricted to the
    cross-graph pairs whose endpoints both lie in the cluster; selection
    follows the uvp greedy semantics, skipping entities already used.
    Returns existing plus the picked pairs (stage tag S1).
    """
    labels = assignment.labels
    nf = assignment.n_first
    result = existing
    for j in range(assignment.k):
        m_j = int(quota.targets[j])
        if m_j <= 0:
            continue
        g1_idx = np.where(labels[:nf] == j)[0]
        g2_idx = np.where(labels[nf:] == j)[0]
        if g1_idx.size == 0 or g2_idx.size == 0:
            continue
        sub = sim[np.ix_(g1_idx, g2_idx)]
        # map the exclusion set into the submatrix's index space
        local = uvp_seeds(sub, m_j, exclude=_project_exclusions(result, g1_idx, g2_idx),
                          stage="S1")
        result = add_pairs(result, [
            SeedPair(int(g1_idx[p.e1]), int(g2_idx[p.e2]), p.score, "S1")
            for p in local.pairs
        ])
    return result


def _project_exclusions(seeds: SeedSet, g1_idx: np.ndarray, g2_idx: np.ndarray) -> SeedSet:
    pos1 = {int(e): i for i, e in enumerate(g1_idx)}
    pos2 = {int(e): i for i, e in enumerate(g2_idx)}
    dummy = SeedSet()
    dummy.used1 = {pos1[e] for e in seeds.used1 if e in pos1}
    dummy.used2 = {pos2[e] for e in seeds.used2 if e in pos2}
    return dummy
