"""movclust: movement-pattern clustering for fixed-length time series."""

from .core_data import (
    RawObservation,
    SeriesCollection,
    SymbolicSeries,
    TimeSeries,
    assemble_series,
    discretize,
    drop_sparse,
    fill_forward,
    fill_mean,
    filter_outliers,
    load_long_csv,
    load_wide_csv,
    minmax_scale,
)
from .clustering import (
    ClusterAssignment,
    Dendrogram,
    agglomerative,
    cut_dendrogram,
    kmeans,
    kmedoids,
)
from .distances import (
    DistanceMatrix,
    distance_matrix,
    dtw,
    euclidean,
    levenshtein,
    mpbd,
    normalize_matrix,
    normalized_levenshtein,
)
from .evaluation import bcss, ch_index, db_index, evaluate, mpbi, sweep_k, wcss
from .image_features import (
    FeatureVector,
    ImageGrid,
    cluster_features,
    load_external_features,
    pool_features,
    rasterize,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
