"""Topological regime tagging for time series from dynamical systems.

Pipeline: simulate or ingest a series, cut sliding-window point clouds,
compute Vietoris-Rips persistence per window, keep the top degree-1 bar
lengths as features, and k-means them into regime labels.
"""

from .sim import (
    DivergenceError,
    SdeSpec,
    Trajectory,
    VectorField,
    euler_maruyama,
    hopf_field,
    lorenz_field,
    rk4_integrate,
)
from .embed import (
    PointCloud,
    TimeSeries,
    Window,
    delay_embed,
    project,
    sliding_windows,
)
from .ph import (
    Bar,
    Filtration,
    PersistenceDiagram,
    Simplex,
    betti_at,
    cap_infinite_bars,
    compute_persistence,
    rips_filtration,
)
from .features import FeatureVector, featurize_windows, top_persistence_lengths
from .cluster import (
    KMeansModel,
    TaggedWindow,
    kmeans_fit,
    kmeans_predict,
    tag_windows,
)

__version__ = "0.1.0"

__all__ = [
    "DivergenceError",
    "VectorField",
    "SdeSpec",
    "Trajectory",
    "rk4_integrate",
    "euler_maruyama",
    "hopf_field",
    "lorenz_field",
    "TimeSeries",
    "PointCloud",
    "Window",
    "project",
    "delay_embed",
    "sliding_windows",
    "Simplex",
    "Filtration",
    "Bar",
    "PersistenceDiagram",
    "rips_filtration",
    "compute_persistence",
    "betti_at",
    "cap_infinite_bars",
    "FeatureVector",
    "top_persistence_lengths",
    "featurize_windows",
    "KMeansModel",
    "TaggedWindow",
    "kmeans_fit",
    "kmeans_predict",
    "tag_windows",
    "__version__",
]
