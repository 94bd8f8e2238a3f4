"""Image branch: rasterize series, pool features, ingest external vectors.

The built-in extractor draws each series as a binary polyline image and
block-averages it into a fixed-length vector; externally computed feature
vectors (e.g. from a pretrained CNN run elsewhere) can be loaded from CSV
and clustered the same way.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import clustering
from .errors import DataError


@dataclass
class ImageGrid:
    width: int
    height: int
    pixels: np.ndarray  # shape (height, width), row 0 at the top, values 0/1

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=float)
        if self.pixels.shape != (self.height, self.width):
            raise DataError(f"pixel shape {self.pixels.shape} != ({self.height}, {self.width})")


@dataclass
class FeatureVector:
    series_id: str
    features: np.ndarray
    extractor: str

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)


def _bresenham(r0, c0, r1, c1):
    """Integer line stepping between two grid cells, inclusive."""
    dr = abs(r1 - r0)
    dc = abs(c1 - c0)
    sr = 1 if r1 >= r0 else -1
    sc = 1 if c1 >= c0 else -1
    err = dc - dr
    r, c = r0, c0
    while True:
        yield r, c
        if r == r1 and c == c1:
            return
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c += sc
        if e2 < dc:
            err += dc
            r += sr


def rasterize(series, width: int = 64, height: int = 64) -> ImageGrid:
    """Draw the series polyline into a binary width x height grid.

    Time maps onto columns [0, width-1]; value 0 maps to the bottom row and
    value 1 to the top row.  No anti-aliasing: pixels are 0 or 1.
    """
    if width < 2 or height < 2:
        raise DataError(f"grid must be at least 2x2, got {width}x{height}")
    values = np.asarray(getattr(series, "values", series), dtype=float)
    if np.isnan(values).any():
        raise DataError("rasterize requires a complete series")
    if (values < 0).any() or (values > 1).any():
        raise DataError("rasterize expects values in [0, 1] (scaled series)")
    n = len(values)
    if n < 2:
        raise DataError("rasterize needs at least 2 points")
    cols = np.rint(np.arange(n) * (width - 1) / (n - 1)).astype(int)
    rows = (height - 1) - np.rint(values * (height - 1)).astype(int)
    pixels = np.zeros((height, width))
    for t in range(n - 1):
        for r, c in _bresenham(rows[t], cols[t], rows[t + 1], cols[t + 1]):
            pixels[r, c] = 1.0
    return ImageGrid(width=width, height=height, pixels=pixels)


def pool_features(image: ImageGrid, block: int = 4, series_id: str = "") -> FeatureVector:
    """Average intensity per non-overlapping block x block tile, row-major."""
    if image.width % block or image.height % block:
        raise DataError(f"block {block} does not divide {image.width}x{image.height}")
    h, w = image.height // block, image.width // block
    tiles = image.pixels.reshape(h, block, w, block).mean(axis=(1, 3))
    return FeatureVector(
        series_id=series_id,
        features=tiles.reshape(-1),
        extractor=f"raster{image.width}x{image.height}/pool{block}",
    )


def extract_features(collection, width: int = 64, height: int = 64, block: int = 4):
    """Rasterize-and-pool every series of a scaled numeric collection."""
    return [
        pool_features(rasterize(s, width, height), block, series_id=s.series_id)
        for s in collection.series
    ]


def write_features_csv(vectors, path):
    if not vectors:
        raise DataError("no feature vectors to write")
    m = len(vectors[0].features)
    with open(str(path), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["series_id"] + [f"f{i + 1}" for i in range(m)])
        for vec in vectors:
            if len(vec.features) != m:
                raise DataError(f"{vec.series_id}: inconsistent feature length")
            writer.writerow([vec.series_id] + [format(v, ".9g") for v in vec.features])


def load_external_features(path, known_ids=None, extractor: str = "external"):
    """Load feature vectors from CSV (header series_id,f1,...,fm).

    Ragged rows, non-numeric cells, and ids outside ``known_ids`` are errors.
    """
    vectors = []
    unknown = []
    try:
        fh = open(str(path), newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open feature file: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("feature file is empty") from None
        m = len(header) - 1
        if m < 1:
            raise DataError("feature file needs at least one feature column")
        for lineno, row in enumerate(reader, start=2):
            if len(row) - 1 != m:
                raise DataError(f"line {lineno}: ragged row ({len(row) - 1} features, expected {m})")
            sid = row[0]
            try:
                features = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise DataError(f"line {lineno}: non-numeric cell: {exc}") from exc
            if known_ids is not None and sid not in known_ids:
                unknown.append(sid)
            vectors.append(FeatureVector(series_id=sid, features=features, extractor=extractor))
    if unknown:
        raise DataError(f"unknown series ids in feature file: {sorted(unknown)}")
    return vectors


def cluster_features(vectors, k: int, seed: int = 0) -> clustering.ClusterAssignment:
    """k-means over feature vectors; the descriptor records the extractor."""
    if not vectors:
        raise DataError("no feature vectors")
    extractors = {v.extractor for v in vectors}
    if len(extractors) > 1:
        raise DataError(f"mixed extractors in one collection: {sorted(extractors)}")
    X = np.stack([v.features for v in vectors])
    ids = [v.series_id for v in vectors]
    assignment = clustering.kmeans(X, ids, k=k, seed=seed)
    assignment.algorithm = f"kmeans+features[{extractors.pop()}](k={k})"
    return assignment


def write_pgm(image: ImageGrid, path):
    """P2 ASCII dump for visual inspection (maxval 1)."""
    lines = ["P2", f"{image.width} {image.height}", "1"]
    for row in image.pixels.astype(int):
        lines.append(" ".join(str(v) for v in row))
    with open(str(path), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
