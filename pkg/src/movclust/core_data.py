"""Ingestion, alignment, preprocessing and symbol discretization.

The pipeline order is fixed: assemble -> drop_sparse -> fill (forward for
price mode, mean for sales mode) -> minmax_scale -> discretize ->
filter_outliers.  Every step is a pure transformation; collections are
never mutated in place and each step appends a provenance record.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError, DuplicateObservationError

SYMBOLS = "ABCDE"

#: Upper bounds of the A..D symbol bands on the [0.1, 1] scale.
DEFAULT_THRESHOLDS = (0.29, 0.47, 0.65, 0.83)

DEFAULT_SCHEMA = {
    "series_id": "series_id",
    "date": "date",
    "value": "value",
    "category": "category",
    "store": "store",
}


@dataclass(frozen=True)
class RawObservation:
    series_id: str
    date: dt.date
    value: float
    category: str | None = None
    store: str | None = None


@dataclass(frozen=True)
class RejectedRow:
    line_number: int
    raw_row: str
    reason: str


@dataclass
class TimeSeries:
    """One entity's value history on the shared uniform daily index."""

    series_id: str
    values: np.ndarray
    missing_mask: np.ndarray
    category: str | None = None
    store: str | None = None
    product: str | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.missing_mask = np.asarray(self.missing_mask, dtype=bool)
        if self.values.shape != self.missing_mask.shape:
            raise DataError(f"{self.series_id}: values/mask length mismatch")

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class SymbolicSeries:
    """A TimeSeries discretized into integer levels 1..5 (A..E)."""

    series_id: str
    levels: np.ndarray
    category: str | None = None
    store: str | None = None
    product: str | None = None

    def __post_init__(self):
        self.levels = np.asarray(self.levels, dtype=int)

    def __len__(self) -> int:
        return len(self.levels)

    def symbols(self) -> str:
        return "".join(SYMBOLS[v - 1] for v in self.levels)


@dataclass
class SeriesCollection:
    """Ordered list of series sharing one length, plus preprocessing history."""

    series: list
    mode: str = "price"
    provenance: list = field(default_factory=list)

    def __post_init__(self):
        ids = [s.series_id for s in self.series]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate series_id in collection")
        lengths = {len(s) for s in self.series}
        if len(lengths) > 1:
            raise DataError(f"collection members differ in length: {sorted(lengths)}")

    @property
    def ids(self) -> list[str]:
        return [s.series_id for s in self.series]

    def __len__(self) -> int:
        return len(self.series)

    def get(self, series_id: str):
        for s in self.series:
            if s.series_id == series_id:
                return s
        raise KeyError(series_id)

    def with_step(self, step: str, params: dict, dropped_ids=()) -> list:
        return self.provenance + [
            {"step": step, "params": params, "dropped_ids": sorted(dropped_ids)}
        ]


# ---------------------------------------------------------------------------
# Loading


def load_long_csv(path, schema: dict | None = None):
    """Read a long-format CSV into observations plus a rejects report.

    Returns (observations, rejects).  Rows with an unparseable date or value
    are routed to the rejects list; duplicate (series_id, store, date) keys
    are a hard error.
    """
    schema = {**DEFAULT_SCHEMA, **(schema or {})}
    observations: list[RawObservation] = []
    rejects: list[RejectedRow] = []
    seen: set[tuple] = set()
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open input file: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file, header row required")
        for role in ("series_id", "date", "value"):
            if schema[role] not in reader.fieldnames:
                raise DataError(
                    f"{path}: mapped column {schema[role]!r} (for {role}) not in header"
                )
        has_category = schema["category"] in reader.fieldnames
        has_store = schema["store"] in reader.fieldnames
        for lineno, row in enumerate(reader, start=2):
            raw = ",".join("" if v is None else v for v in row.values())
            try:
                date = dt.date.fromisoformat(row[schema["date"]].strip())
            except (ValueError, AttributeError):
                rejects.append(RejectedRow(lineno, raw, "unparseable date"))
                continue
            try:
                value = float(row[schema["value"]])
            except (TypeError, ValueError):
                rejects.append(RejectedRow(lineno, raw, "unparseable value"))
                continue
            series_id = row[schema["series_id"]].strip()
            if not series_id:
                rejects.append(RejectedRow(lineno, raw, "empty series_id"))
                continue
            category = row[schema["category"]].strip() or None if has_category else None
            store = row[schema["store"]].strip() or None if has_store else None
            key = (series_id, store, date)
            if key in seen:
                raise DuplicateObservationError(
                    f"line {lineno}: duplicate observation for {key}"
                )
            seen.add(key)
            observations.append(RawObservation(series_id, date, value, category, store))
    return observations, rejects


def load_wide_csv(path):
    """Read a wide CSV (first column series_id, remaining columns ISO dates).

    Empty cells mean missing.  Returns (observations, rejects) so the result
    feeds the same assemble_series path as the long format.
    """
    observations: list[RawObservation] = []
    rejects: list[RejectedRow] = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open input file: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        try:
            dates = [dt.date.fromisoformat(c) for c in header[1:]]
        except ValueError as exc:
            raise DataError(f"{path}: non-ISO date in header: {exc}") from exc
        seen: set[str] = set()
        for lineno, row in enumerate(reader, start=2):
            raw = ",".join(row)
            if not row or not row[0].strip():
                rejects.append(RejectedRow(lineno, raw, "empty series_id"))
                continue
            series_id = row[0].strip()
            if series_id in seen:
                raise DuplicateObservationError(f"line {lineno}: duplicate row for {series_id}")
            seen.add(series_id)
            if len(row) - 1 != len(dates):
                rejects.append(RejectedRow(lineno, raw, "column count mismatch"))
                continue
            for date, cell in zip(dates, row[1:]):
                cell = cell.strip()
                if not cell:
                    continue
                try:
                    value = float(cell)
                except ValueError:
                    rejects.append(RejectedRow(lineno, raw, f"unparseable value {cell!r}"))
                    continue
                observations.append(RawObservation(series_id, date, value))
    return observations, rejects


# ---------------------------------------------------------------------------
# Assembly


def assemble_series(observations, date_range=None, mode: str = "price") -> SeriesCollection:
    """Align observations onto one shared daily index.

    In sales mode a (series_id, store) pair identifies a series and the
    composite id becomes ``"<series_id>::<store>"``.  The date range
    defaults to [min date, max date] over all observations.
    """
    if not observations:
        raise DataError("assemble_series: empty observation list")
    if mode not in ("price", "sales"):
        raise DataError(f"unknown mode {mode!r}")
    if date_range is None:
        start = min(o.date for o in observations)
        end = max(o.date for o in observations)
    else:
        start, end = date_range
        if start > end:
            raise DataError(f"date range start {start} after end {end}")
    n = (end - start).days + 1

    grouped: dict[str, dict] = {}
    for obs in observations:
        if obs.date < start or obs.date > end:
            continue
        if mode == "sales" and obs.store is not None:
            key = f"{obs.series_id}::{obs.store}"
        else:
            key = obs.series_id
        entry = grouped.setdefault(
            key,
            {
                "values": np.full(n, np.nan),
                "mask": np.ones(n, dtype=bool),
                "category": obs.category,
                "store": obs.store,
                "product": obs.series_id,
            },
        )
        pos = (obs.date - start).days
        if not entry["mask"][pos]:
            raise DuplicateObservationError(
                f"conflicting observations for series {key} on {obs.date}"
            )
        entry["values"][pos] = obs.value
        entry["mask"][pos] = False

    series = [
        TimeSeries(
            series_id=key,
            values=entry["values"],
            missing_mask=entry["mask"],
            category=entry["category"],
            store=entry["store"],
            product=entry["product"],
        )
        for key, entry in sorted(grouped.items())
    ]
    provenance = [
        {
            "step": "assemble",
            "params": {"mode": mode, "start": start.isoformat(), "end": end.isoformat(), "n": n},
            "dropped_ids": [],
        }
    ]
    return SeriesCollection(series=series, mode=mode, provenance=provenance)


# ---------------------------------------------------------------------------
# Preprocessing steps


def drop_sparse(collection: SeriesCollection, max_missing_fraction: float = 0.8) -> SeriesCollection:
    """Drop series with strictly more than the allowed fraction missing."""
    if not 0.0 <= max_missing_fraction <= 1.0:
        raise DataError(f"max_missing_fraction out of [0,1]: {max_missing_fraction}")
    kept, dropped = [], []
    for s in collection.series:
        frac = float(np.count_nonzero(s.missing_mask)) / len(s)
        if frac > max_missing_fraction:
            dropped.append(s.series_id)
        else:
            kept.append(s)
    return SeriesCollection(
        series=kept,
        mode=collection.mode,
        provenance=collection.with_step(
            "drop_sparse", {"max_missing_fraction": max_missing_fraction}, dropped
        ),
    )


def fill_forward(series: TimeSeries) -> TimeSeries:
    """Fill missing positions with the most recent present value.

    Leading gaps are backfilled from the first present value so the result
    is always complete.
    """
    present = ~series.missing_mask
    if not present.any():
        raise DataError(f"{series.series_id}: cannot fill an all-missing series")
    values = series.values.copy()
    idx = np.where(present, np.arange(len(values)), -1)
    idx = np.maximum.accumulate(idx)
    first = int(np.argmax(present))
    idx[idx < 0] = first
    return replace(series, values=values[idx], missing_mask=series.missing_mask.copy())


def fill_mean(series: TimeSeries) -> TimeSeries:
    """Fill missing positions with the mean of the series' present values."""
    present = ~series.missing_mask
    if not present.any():
        raise DataError(f"{series.series_id}: cannot fill an all-missing series")
    mean = float(series.values[present].mean())
    values = np.where(series.missing_mask, mean, series.values)
    return replace(series, values=values, missing_mask=series.missing_mask.copy())


def fill_collection(collection: SeriesCollection, strategy: str) -> SeriesCollection:
    if strategy == "forward":
        filled = [fill_forward(s) for s in collection.series]
    elif strategy == "mean":
        filled = [fill_mean(s) for s in collection.series]
    else:
        raise DataError(f"unknown fill strategy {strategy!r}")
    return SeriesCollection(
        series=filled,
        mode=collection.mode,
        provenance=collection.with_step("fill", {"strategy": strategy}),
    )


def minmax_scale(series: TimeSeries, lo: float = 0.1, hi: float = 1.0) -> TimeSeries:
    """Min-max scale one complete series into [lo, hi].

    A constant series maps every position to lo.
    """
    if lo >= hi:
        raise DataError(f"scale bounds require lo < hi, got {lo} >= {hi}")
    if np.isnan(series.values).any():
        raise DataError(f"{series.series_id}: scaling requires a complete series")
    vmin = series.values.min()
    vmax = series.values.max()
    if vmax == vmin:
        scaled = np.full_like(series.values, lo)
    else:
        scaled = np.clip(lo + (hi - lo) * (series.values - vmin) / (vmax - vmin), lo, hi)
        # pin the extremes exactly; the affine map can be one ulp off
        scaled[series.values == vmin] = lo
        scaled[series.values == vmax] = hi
    return replace(series, values=scaled, missing_mask=series.missing_mask.copy())


def scale_collection(collection: SeriesCollection, lo: float = 0.1, hi: float = 1.0) -> SeriesCollection:
    return SeriesCollection(
        series=[minmax_scale(s, lo, hi) for s in collection.series],
        mode=collection.mode,
        provenance=collection.with_step("minmax_scale", {"lo": lo, "hi": hi}),
    )


def discretize(series: TimeSeries, thresholds=DEFAULT_THRESHOLDS) -> SymbolicSeries:
    """Map scaled values onto integer levels 1..5 (A..E).

    Band edges are half-open on the right: x < t1 -> 1, t1 <= x < t2 -> 2, ...
    Passing an already-symbolic series is a type error, not a silent re-map.
    """
    if isinstance(series, SymbolicSeries):
        raise TypeError("series is already discretized")
    values = series.values
    if np.isnan(values).any():
        raise DataError(f"{series.series_id}: discretize requires a complete series")
    if (values < 0).any() or (values > 1).any():
        raise DataError(
            f"{series.series_id}: values outside [0, 1]; run minmax_scale first"
        )
    if len(thresholds) != 4 or list(thresholds) != sorted(thresholds):
        raise DataError(f"need 4 increasing thresholds, got {thresholds}")
    levels = 1 + np.searchsorted(np.asarray(thresholds), values, side="right")
    return SymbolicSeries(
        series_id=series.series_id,
        levels=levels,
        category=series.category,
        store=series.store,
        product=series.product,
    )


def discretize_collection(collection: SeriesCollection, thresholds=DEFAULT_THRESHOLDS) -> SeriesCollection:
    return SeriesCollection(
        series=[discretize(s, thresholds) for s in collection.series],
        mode=collection.mode,
        provenance=collection.with_step("discretize", {"thresholds": list(thresholds)}),
    )


def filter_outliers(
    collection: SeriesCollection,
    metric: str = "mpbd",
    percentile: float = 95.0,
    omega: float = 2.0,
    window: int | None = None,
) -> SeriesCollection:
    """Remove series whose nearest-neighbor distance is above the percentile.

    Works on numeric or symbolic collections; the metric must be compatible
    with the representation (levenshtein needs symbols).
    """
    from . import distances  # local import, distances has no core_data dependency

    if not 0.0 < percentile < 100.0 and percentile != 100.0:
        raise DataError(f"percentile out of (0, 100]: {percentile}")
    if len(collection) < 2:
        raise DataError("outlier filtering needs at least 2 series")
    matrix = distances.distance_matrix(collection, metric, omega=omega, window=window)
    entries = matrix.entries.copy()
    np.fill_diagonal(entries, np.inf)
    nn = entries.min(axis=1)
    cutoff = float(np.percentile(nn, percentile))
    dropped = [s.series_id for s, d in zip(collection.series, nn) if d > cutoff]
    kept = [s for s in collection.series if s.series_id not in set(dropped)]
    return SeriesCollection(
        series=kept,
        mode=collection.mode,
        provenance=collection.with_step(
            "filter_outliers",
            {"metric": metric, "percentile": percentile, "omega": omega},
            dropped,
        ),
    )
