"""Pairwise distances and full symmetric distance matrices.

Four metrics: euclidean, levenshtein, dtw, and the movement-pattern
distance (mpbd) that compares per-step deltas instead of values.  Matrix
construction partitions the upper triangle across worker threads; every
cell has exactly one writer, so the result is bitwise independent of the
worker count.
"""

from __future__ import annotations

import concurrent.futures
import csv
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError

METRICS = ("euclidean", "levenshtein", "dtw", "mpbd")


def delta_sequence(x) -> np.ndarray:
    """Per-step deltas d[t] = x[t] - x[t+1] (sign convention of the movement rules)."""
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        raise DataError("delta sequence needs length >= 2")
    return x[:-1] - x[1:]


def euclidean(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DataError(f"euclidean: length mismatch {len(p)} vs {len(q)}")
    return float(np.sqrt(np.sum((q - p) ** 2)))


def levenshtein(p, q) -> int:
    """Edit distance with unit insert/delete/substitute costs.

    Accepts strings or integer level sequences.
    """
    p = list(p)
    q = list(q)
    if len(p) < len(q):
        p, q = q, p
    prev = list(range(len(q) + 1))
    for i, a in enumerate(p, start=1):
        cur = [i] + [0] * len(q)
        for j, b in enumerate(q, start=1):
            cur[j] = min(
                prev[j] + 1,
                cur[j - 1] + 1,
                prev[j - 1] + (0 if a == b else 1),
            )
        prev = cur
    return prev[-1]


def normalized_levenshtein(p, q) -> float:
    longest = max(len(list(p)), len(list(q)))
    if longest == 0:
        return 0.0
    return levenshtein(p, q) / longest


def dtw(p, q, window: int | None = None) -> float:
    """Dynamic time warping with squared local cost and a final square root.

    ``window`` is a Sakoe-Chiba half-width; None means unconstrained.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    n, m = len(p), len(q)
    if n == 0 or m == 0:
        raise DataError("dtw: empty sequence")
    if window is not None and window < abs(n - m):
        raise DataError(f"dtw window {window} smaller than length difference {abs(n - m)}")
    inf = np.inf
    prev = np.full(m + 1, inf)
    prev[0] = 0.0
    for i in range(1, n + 1):
        cur = np.full(m + 1, inf)
        if window is None:
            j_lo, j_hi = 1, m
        else:
            j_lo = max(1, i - window)
            j_hi = min(m, i + window)
        cost = (p[i - 1] - q[j_lo - 1 : j_hi]) ** 2
        for j, c in zip(range(j_lo, j_hi + 1), cost):
            cur[j] = c + min(prev[j], cur[j - 1], prev[j - 1])
        prev = cur
    return float(np.sqrt(prev[m]))


def mpbd(p, q, omega: float = 2.0) -> float:
    """Movement-pattern distance over aligned delta sequences.

    Per step: 0 when deltas are equal; |a-b| when both move in the same
    direction; omega*|a-b| when the signs differ (a flat step against a
    move counts as a sign difference, sign(0) = 0).
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DataError(f"mpbd: length mismatch {len(p)} vs {len(q)}")
    if len(p) < 2:
        raise DataError("mpbd: sequences must have length >= 2")
    dp = p[:-1] - p[1:]
    dq = q[:-1] - q[1:]
    gap = np.abs(dp - dq)
    weighted = np.sign(dp) != np.sign(dq)
    cost = np.where(dp == dq, 0.0, np.where(weighted, omega * gap, gap))
    return float(cost.sum())


@dataclass
class DistanceMatrix:
    """Symmetric pairwise distances tagged with metric and normalization."""

    ids: list[str]
    entries: np.ndarray
    metric: str
    normalization: str = "none"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        n = len(self.ids)
        if self.entries.shape != (n, n):
            raise DataError(f"matrix shape {self.entries.shape} does not match {n} ids")

    def validate(self):
        if not np.allclose(self.entries, self.entries.T):
            raise DataError("matrix not symmetric")
        if np.diagonal(self.entries).any():
            raise DataError("matrix diagonal not zero")
        if (self.entries < 0).any():
            raise DataError("negative distance entry")


def _sequences_for(collection, metric):
    from .core_data import SymbolicSeries

    seqs = []
    symbolic = None
    for s in collection.series:
        if isinstance(s, SymbolicSeries):
            this_symbolic = True
            seq = np.asarray(s.levels, dtype=float)
        else:
            this_symbolic = False
            seq = np.asarray(s.values, dtype=float)
            if np.isnan(seq).any():
                raise DataError(f"{s.series_id}: incomplete series in distance matrix")
        if symbolic is None:
            symbolic = this_symbolic
        elif symbolic != this_symbolic:
            raise DataError("collection mixes numeric and symbolic series")
        seqs.append(seq)
    if metric == "levenshtein" and not symbolic:
        raise DataError("levenshtein requires a discretized (symbolic) collection")
    return seqs


def distance_matrix(
    collection,
    metric: str,
    omega: float = 2.0,
    window: int | None = None,
    threads: int = 0,
) -> DistanceMatrix:
    """Compute all pairwise distances for a collection.

    ``threads=0`` picks the CPU count; the result is identical for any
    thread count because each upper-triangle cell is computed once from
    immutable inputs.
    """
    if metric not in METRICS:
        raise DataError(f"unknown metric {metric!r}")
    if len(collection.series) < 2:
        raise DataError("distance matrix needs at least 2 series")
    seqs = _sequences_for(collection, metric)
    ids = [s.series_id for s in collection.series]
    n = len(seqs)

    if metric == "euclidean":
        pair = lambda a, b: euclidean(a, b)
    elif metric == "levenshtein":
        pair = lambda a, b: float(levenshtein(a.astype(int), b.astype(int)))
    elif metric == "dtw":
        pair = lambda a, b: dtw(a, b, window=window)
    else:
        pair = lambda a, b: mpbd(a, b, omega=omega)

    entries = np.zeros((n, n))

    def fill_rows(rows):
        for i in rows:
            for j in range(i + 1, n):
                entries[i, j] = pair(seqs[i], seqs[j])

    workers = threads if threads > 0 else (os.cpu_count() or 1)
    if workers == 1 or n < 4:
        fill_rows(range(n - 1))
    else:
        chunks = [range(i, n - 1, workers) for i in range(workers)]
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            for fut in [pool.submit(fill_rows, c) for c in chunks]:
                fut.result()
    entries += entries.T

    params = {"series_length": len(seqs[0])}
    if metric == "mpbd":
        params["omega"] = omega
    if metric == "dtw":
        params["window"] = window
    return DistanceMatrix(ids=ids, entries=entries, metric=metric, params=params)


def normalize_matrix(matrix: DistanceMatrix, mode: str, value_range: float = 0.9) -> DistanceMatrix:
    """Rescale a raw matrix.

    ``matrix_max`` divides by the largest entry.  ``table1`` applies
    metric-specific denominators so comparably-sized scenarios land on a
    common [0, 1] scale: mpbd / (omega * n), levenshtein / n,
    euclidean / (sqrt(n) * value_range), dtw / matrix max.  ``none`` is
    the identity.
    """
    if matrix.normalization != "none":
        raise DataError(f"matrix already normalized ({matrix.normalization})")
    entries = matrix.entries.copy()
    if mode == "none":
        pass
    elif mode == "matrix_max":
        peak = entries.max()
        if peak > 0:
            entries /= peak
    elif mode == "table1":
        n = matrix.params.get("series_length")
        if not n:
            raise DataError("table1 normalization needs params['series_length']")
        if matrix.metric == "mpbd":
            entries /= matrix.params.get("omega", 2.0) * n
        elif matrix.metric == "levenshtein":
            entries /= n
        elif matrix.metric == "euclidean":
            entries /= np.sqrt(n) * value_range
        elif matrix.metric == "dtw":
            peak = entries.max()
            if peak > 0:
                entries /= peak
        else:
            raise DataError(f"no table1 rule for metric {matrix.metric!r}")
    else:
        raise DataError(f"unknown normalization mode {mode!r}")
    return replace(matrix, entries=entries, normalization=mode, params=dict(matrix.params))


# ---------------------------------------------------------------------------
# File format


def write_matrix_csv(matrix: DistanceMatrix, path):
    """CSV with an id header column/row plus a JSON sidecar next to it."""
    path = str(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id"] + matrix.ids)
        for sid, row in zip(matrix.ids, matrix.entries):
            writer.writerow([sid] + [format(v, ".9g") for v in row])
    sidecar = {
        "metric": matrix.metric,
        "normalization": matrix.normalization,
        "params": matrix.params,
    }
    with open(path.rsplit(".", 1)[0] + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_matrix_csv(path) -> DistanceMatrix:
    path = str(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        ids = header[1:]
        rows = []
        for row in reader:
            rows.append([float(v) for v in row[1:]])
    try:
        with open(path.rsplit(".", 1)[0] + ".json", encoding="utf-8") as fh:
            sidecar = json.load(fh)
    except OSError:
        sidecar = {"metric": "unknown", "normalization": "none", "params": {}}
    return DistanceMatrix(
        ids=ids,
        entries=np.asarray(rows),
        metric=sidecar["metric"],
        normalization=sidecar["normalization"],
        params=sidecar.get("params", {}),
    )
