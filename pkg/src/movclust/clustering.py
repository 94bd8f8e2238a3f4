"""Partitioning and hierarchical clustering.

All algorithms are deterministic given (data, k, seed): ties in nearest
centroid/medoid go to the smallest index, merge ties go to the
lexicographically smallest representative id pair.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

LINKAGES = ("ward", "average", "complete", "single")


@dataclass
class ClusterAssignment:
    """Mapping series_id -> cluster label in 1..k plus provenance."""

    labels: dict
    k: int
    algorithm: str
    seed: int = 0
    objective: float | None = None

    def __post_init__(self):
        used = set(self.labels.values())
        if used != set(range(1, self.k + 1)):
            raise DataError(f"labels must cover 1..{self.k}, got {sorted(used)}")

    def members(self, cluster: int) -> list[str]:
        return sorted(sid for sid, c in self.labels.items() if c == cluster)

    def label_array(self, ids) -> np.ndarray:
        return np.asarray([self.labels[sid] for sid in ids], dtype=int)


@dataclass
class Dendrogram:
    """Agglomerative merge history: exactly n-1 merges over n leaves."""

    leaves: list[str]
    merges: list = field(default_factory=list)  # (left_members, right_members, height, size)

    def heights(self) -> list[float]:
        return [m[2] for m in self.merges]


def _canonical_labels(groups: list[list[str]], k: int, algorithm: str, seed: int,
                      objective: float | None) -> ClusterAssignment:
    """Number clusters by decreasing size, ties by smallest member id."""
    order = sorted(range(len(groups)), key=lambda g: (-len(groups[g]), min(groups[g])))
    labels = {}
    for new_label, g in enumerate(order, start=1):
        for sid in groups[g]:
            labels[sid] = new_label
    return ClusterAssignment(labels=labels, k=k, algorithm=algorithm, seed=seed,
                             objective=objective)


# ---------------------------------------------------------------------------
# k-means


def _farthest_point_indices(first: int, k: int, point_dist) -> list[int]:
    """Greedy spread: repeatedly take the point farthest from the chosen set."""
    chosen = [first]
    nearest = point_dist(first)
    while len(chosen) < k:
        nxt = int(np.argmax(nearest))  # argmax takes the smallest index on ties
        chosen.append(nxt)
        nearest = np.minimum(nearest, point_dist(nxt))
    return chosen


def kmeans(vectors: np.ndarray, ids, k: int, seed: int = 0, max_iter: int = 300,
           tol: float = 1e-6) -> ClusterAssignment:
    """Lloyd iterations with deterministic seeded farthest-point init.

    Empty clusters are repaired by reseeding with the point farthest from
    its assigned centroid.  The objective is the final WCSS.
    """
    X = np.asarray(vectors, dtype=float)
    ids = list(ids)
    n = len(ids)
    if X.shape[0] != n:
        raise DataError("vectors/ids length mismatch")
    if not 2 <= k <= n:
        raise DataError(f"k={k} out of range [2, {n}]")

    rng = random.Random(seed)
    first = rng.randrange(n)
    point_dist = lambda i: ((X - X[i]) ** 2).sum(axis=1)
    centers = X[_farthest_point_indices(first, k, point_dist)].copy()

    prev_wcss = np.inf
    labels = None
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        # repair empty clusters with the worst-fitting point from a non-singleton cluster
        repaired = False
        for c in range(k):
            if not (new_labels == c).any():
                repaired = True
                fit = d2[np.arange(n), new_labels]
                counts = np.bincount(new_labels, minlength=k)
                fit = np.where(counts[new_labels] > 1, fit, -np.inf)
                worst = int(np.argmax(fit))
                new_labels[worst] = c
                d2[worst, :] = np.inf
                d2[worst, c] = 0.0
        for c in range(k):
            members = new_labels == c
            centers[c] = X[members].mean(axis=0)
        wcss = float(((X - centers[new_labels]) ** 2).sum())
        if not repaired:
            assert wcss <= prev_wcss + 1e-9 * max(1.0, abs(prev_wcss)), "WCSS increased"
        converged = labels is not None and np.array_equal(new_labels, labels)
        improvement = prev_wcss - wcss
        labels = new_labels
        prev_wcss = wcss
        if converged or improvement < tol:
            break

    groups = [[ids[i] for i in np.flatnonzero(labels == c)] for c in range(k)]
    return _canonical_labels(groups, k, f"kmeans(k={k})", seed, prev_wcss)


# ---------------------------------------------------------------------------
# k-medoids


def kmedoids(matrix, k: int, seed: int = 0, max_iter: int = 100) -> ClusterAssignment:
    """Alternating assignment / medoid update on a precomputed matrix.

    ``matrix`` is a DistanceMatrix or a bare symmetric ndarray with ids
    0..n-1.
    """
    if hasattr(matrix, "entries"):
        D = np.asarray(matrix.entries, dtype=float)
        ids = list(matrix.ids)
    else:
        D = np.asarray(matrix, dtype=float)
        ids = [str(i) for i in range(D.shape[0])]
    n = len(ids)
    if not 2 <= k <= n:
        raise DataError(f"k={k} out of range [2, {n}]")

    rng = random.Random(seed)
    first = rng.randrange(n)
    medoids = _farthest_point_indices(first, k, lambda i: D[i].copy())

    labels = None
    for _ in range(max_iter):
        cols = D[:, medoids]
        new_labels = cols.argmin(axis=1)
        for c in range(k):
            if not (new_labels == c).any():
                fit = cols[np.arange(n), new_labels]
                counts = np.bincount(new_labels, minlength=k)
                fit = np.where(counts[new_labels] > 1, fit, -np.inf)
                worst = int(np.argmax(fit))
                new_labels[worst] = c
                medoids[c] = worst
                cols = D[:, medoids]
        new_medoids = []
        for c in range(k):
            members = np.flatnonzero(new_labels == c)
            costs = D[np.ix_(members, members)].sum(axis=1)
            new_medoids.append(int(members[int(np.argmin(costs))]))
        stable = new_medoids == medoids and labels is not None and np.array_equal(new_labels, labels)
        medoids = new_medoids
        labels = new_labels
        if stable:
            break

    objective = float(D[np.arange(n), [medoids[c] for c in labels]].sum())
    groups = [[ids[i] for i in np.flatnonzero(labels == c)] for c in range(k)]
    return _canonical_labels(groups, k, f"kmedoids(k={k})", seed, objective)


# ---------------------------------------------------------------------------
# agglomerative hierarchical


def agglomerative(matrix, linkage: str = "ward") -> Dendrogram:
    """Bottom-up merging with Lance-Williams distance updates.

    Merge ties are broken by the lexicographically smallest (left, right)
    representative id pair, so input order does not affect the partition.
    """
    if linkage not in LINKAGES:
        raise DataError(f"unknown linkage {linkage!r}")
    if hasattr(matrix, "entries"):
        D = np.asarray(matrix.entries, dtype=float).copy()
        ids = list(matrix.ids)
    else:
        D = np.asarray(matrix, dtype=float).copy()
        ids = [str(i) for i in range(D.shape[0])]
    n = len(ids)
    if n < 2:
        raise DataError("agglomerative clustering needs at least 2 series")

    active = list(range(n))
    members = {i: (ids[i],) for i in range(n)}
    sizes = {i: 1 for i in range(n)}
    reps = {i: ids[i] for i in range(n)}
    merges = []

    for _ in range(n - 1):
        best = None
        for ai in range(len(active)):
            i = active[ai]
            for aj in range(ai + 1, len(active)):
                j = active[aj]
                d = D[i, j]
                pair = tuple(sorted((reps[i], reps[j])))
                key = (d, pair)
                if best is None or key < best[0]:
                    best = (key, i, j)
        (height, pair), i, j = best
        left, right = (i, j) if reps[i] <= reps[j] else (j, i)

        si, sj = sizes[i], sizes[j]
        dij = D[i, j]
        for m in active:
            if m in (i, j):
                continue
            dim, djm = D[i, m], D[j, m]
            if linkage == "single":
                new = min(dim, djm)
            elif linkage == "complete":
                new = max(dim, djm)
            elif linkage == "average":
                new = (si * dim + sj * djm) / (si + sj)
            else:  # ward
                sm = sizes[m]
                new = np.sqrt(
                    ((si + sm) * dim**2 + (sj + sm) * djm**2 - sm * dij**2)
                    / (si + sj + sm)
                )
            D[i, m] = D[m, i] = new

        merges.append((members[left], members[right], float(height), si + sj))
        members[i] = tuple(sorted(members[left] + members[right]))
        sizes[i] = si + sj
        reps[i] = min(reps[i], reps[j])
        active.remove(j)

    return Dendrogram(leaves=sorted(ids), merges=merges)


def cut_dendrogram(dendrogram: Dendrogram, k: int, seed: int = 0,
                   algorithm: str | None = None) -> ClusterAssignment:
    """Undo the last k-1 merges, leaving exactly k clusters."""
    n = len(dendrogram.leaves)
    if not 1 <= k <= n:
        raise DataError(f"k={k} out of range [1, {n}]")
    parent = {sid: sid for sid in dendrogram.leaves}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for left, right, _, _ in dendrogram.merges[: n - k]:
        ra, rb = find(left[0]), find(right[0])
        parent[max(ra, rb)] = min(ra, rb)

    groups_by_root: dict[str, list[str]] = {}
    for sid in dendrogram.leaves:
        groups_by_root.setdefault(find(sid), []).append(sid)
    groups = list(groups_by_root.values())
    name = algorithm or f"hierarchical(k={k})"
    return _canonical_labels(groups, k, name, seed, None)


# ---------------------------------------------------------------------------
# File formats


def write_assignment_csv(assignment: ClusterAssignment, path, extra: dict | None = None):
    path = str(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["series_id", "cluster"])
        for sid in sorted(assignment.labels):
            writer.writerow([sid, assignment.labels[sid]])
    sidecar = {
        "algorithm": assignment.algorithm,
        "k": assignment.k,
        "seed": assignment.seed,
        "objective": assignment.objective,
    }
    sidecar.update(extra or {})
    with open(path.rsplit(".", 1)[0] + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_assignment_csv(path) -> ClusterAssignment:
    path = str(path)
    labels = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for sid, cluster in reader:
            labels[sid] = int(cluster)
    try:
        with open(path.rsplit(".", 1)[0] + ".json", encoding="utf-8") as fh:
            sidecar = json.load(fh)
    except OSError:
        sidecar = {}
    return ClusterAssignment(
        labels=labels,
        k=max(labels.values()),
        algorithm=sidecar.get("algorithm", "unknown"),
        seed=sidecar.get("seed", 0),
        objective=sidecar.get("objective"),
    )


def write_dendrogram_csv(dendrogram: Dendrogram, path):
    with open(str(path), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "left", "right", "height", "size"])
        for step, (left, right, height, size) in enumerate(dendrogram.merges, start=1):
            writer.writerow([step, left[0], right[0], format(height, ".9g"), size])
