import datetime as dt

import numpy as np
import pytest

from movclust.core_data import SeriesCollection, SymbolicSeries, TimeSeries


def ts(series_id, values, missing=None, **kwargs):
    """Build a TimeSeries; None entries in values mark missing positions."""
    if missing is None:
        missing = [v is None for v in values]
        values = [np.nan if v is None else v for v in values]
    return TimeSeries(
        series_id=series_id,
        values=np.asarray(values, dtype=float),
        missing_mask=np.asarray(missing, dtype=bool),
        **kwargs,
    )


def sym(series_id, levels, **kwargs):
    return SymbolicSeries(series_id=series_id, levels=np.asarray(levels, dtype=int), **kwargs)


def collection(series, mode="price"):
    return SeriesCollection(series=list(series), mode=mode)


def day(offset):
    return dt.date(2021, 1, 1) + dt.timedelta(days=offset)


@pytest.fixture(scope="session")
def sample_dir(tmp_path_factory):
    """Regenerated copies of the bundled synthetic samples."""
    from movclust import sample

    path = tmp_path_factory.mktemp("samples")
    sample.write_long_csv(sample.make_price_rows(), path / "price_long.csv")
    sample.write_long_csv(sample.make_sales_rows(), path / "sales_long.csv")
    return path
