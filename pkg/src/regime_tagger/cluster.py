"""Seeded k-means (k-means++ init, Lloyd iterations) for regime tagging.

Centroids are canonicalized by ascending Euclidean norm (ties broken
lexicographically), so label 0 is always the lowest-persistence regime and
two runs converging to the same centroid set produce identical labels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .features import FeatureVector

__all__ = [
    "KMeansModel",
    "TaggedWindow",
    "kmeans_fit",
    "kmeans_predict",
    "tag_windows",
    "model_to_json",
    "model_from_json",
    "tagged_to_csv",
    "tagged_from_csv",
]


@dataclass(frozen=True)
class KMeansModel:
    k: int
    centroids: np.ndarray
    inertia: float
    seed: int
    iterations_run: int

    def __post_init__(self):
        c = np.asarray(self.centroids, dtype=float)
        if c.ndim != 2 or c.shape[0] != self.k:
            raise ValueError("centroids must be a (k, dim) array")
        object.__setattr__(self, "centroids", c)


@dataclass(frozen=True)
class TaggedWindow:
    window_index: int
    start_time: float
    features: tuple[float, ...]
    label: int


def _squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return (diff * diff).sum(-1)


def _kmeanspp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++: first centroid uniform, then proportional to squared
    distance from the chosen set."""
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    d2 = ((points - centroids[0]) ** 2).sum(-1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            cdf = np.cumsum(d2 / total)
            idx = min(int(np.searchsorted(cdf, rng.random())), n - 1)
        centroids[i] = points[idx]
        d2 = np.minimum(d2, ((points - centroids[i]) ** 2).sum(-1))
    return centroids


def _lloyd(points: np.ndarray, init: np.ndarray, max_iter: int, tol: float):
    """Lloyd iterations from the given centroids.

    Returns (centroids, iterations, inertia_trace).  Inertia is evaluated
    after each assignment step and asserted nonincreasing; empty clusters
    are re-seeded to the point farthest from its current centroid, which
    cannot increase inertia.
    """
    centroids = init.copy()
    trace: list[float] = []
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        d2 = _squared_distances(points, centroids)
        labels = d2.argmin(axis=1)
        nearest = d2[np.arange(points.shape[0]), labels]
        inertia = float(nearest.sum())
        assert not trace or inertia <= trace[-1] * (1 + 1e-12) + 1e-12, (
            "Lloyd inertia increased"
        )
        trace.append(inertia)
        new_centroids = centroids.copy()
        for c in range(centroids.shape[0]):
            members = labels == c
            if members.any():
                new_centroids[c] = points[members].mean(axis=0)
            else:
                new_centroids[c] = points[int(nearest.argmax())]
                nearest = np.minimum(
                    nearest, ((points - new_centroids[c]) ** 2).sum(-1)
                )
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(-1)).max())
        centroids = new_centroids
        if shift < tol:
            break
    return centroids, iterations, trace


def _canonicalize(centroids: np.ndarray) -> np.ndarray:
    norms = np.sqrt((centroids * centroids).sum(-1))
    keys = [centroids[:, d] for d in range(centroids.shape[1] - 1, -1, -1)]
    order = np.lexsort(keys + [norms])
    return centroids[order]


def kmeans_fit(
    features,
    k: int,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-9,
    restarts: int = 10,
) -> KMeansModel:
    """Fit k-means with ``restarts`` independent k-means++ starts, keeping
    the lowest-inertia run (first wins ties).

    Deterministic: restart r draws from PCG64 seeded with
    SeedSequence(seed).spawn()[r].
    """
    if len(features) and isinstance(features[0], FeatureVector):
        points = np.asarray([f.lengths for f in features], dtype=float)
    else:
        points = np.asarray(features, dtype=float)
    if points.ndim != 2:
        raise ValueError("features must be a (n, dim) array")
    if not np.all(np.isfinite(points)):
        raise ValueError("features contain non-finite values")
    n = points.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if n < k:
        raise ValueError(f"need at least k={k} points, got {n}")
    if np.unique(points, axis=0).shape[0] < k:
        raise ValueError(f"need at least k={k} distinct points")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")

    children = np.random.SeedSequence(seed).spawn(restarts)
    best = None
    for child in children:
        rng = np.random.Generator(np.random.PCG64(child))
        init = _kmeanspp_init(points, k, rng)
        centroids, iterations, trace = _lloyd(points, init, max_iter, tol)
        if best is None or trace[-1] < best[2][-1]:
            best = (centroids, iterations, trace)
    centroids, iterations, trace = best
    centroids = _canonicalize(centroids)
    inertia = float(_squared_distances(points, centroids).min(axis=1).sum())
    return KMeansModel(
        k=k,
        centroids=centroids,
        inertia=inertia,
        seed=seed,
        iterations_run=iterations,
    )


def _assign(model: KMeansModel, points: np.ndarray) -> np.ndarray:
    # argmin resolves ties to the lowest centroid index
    return _squared_distances(points, model.centroids).argmin(axis=1)


def kmeans_predict(model: KMeansModel, feature) -> int:
    """Label of the nearest centroid (ties go to the lowest label)."""
    point = np.asarray(
        feature.lengths if isinstance(feature, FeatureVector) else feature,
        dtype=float,
    )
    if point.shape != (model.centroids.shape[1],):
        raise ValueError(
            f"feature has dimension {point.shape}, model expects "
            f"({model.centroids.shape[1]},)"
        )
    return int(_assign(model, point[None, :])[0])


def tag_windows(model: KMeansModel, vectors: list[FeatureVector]) -> list[TaggedWindow]:
    """Tag every feature vector with its nearest-centroid label."""
    points = np.asarray([v.lengths for v in vectors], dtype=float)
    labels = _assign(model, points)
    return [
        TaggedWindow(
            window_index=v.window_index,
            start_time=v.start_time,
            features=v.lengths,
            label=int(lab),
        )
        for v, lab in zip(vectors, labels)
    ]


def model_to_json(model: KMeansModel, path=None) -> str:
    payload = {
        "k": model.k,
        "centroids": [[float(x) for x in row] for row in model.centroids],
        "inertia": model.inertia,
        "seed": model.seed,
        "iterations_run": model.iterations_run,
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def model_from_json(source) -> KMeansModel:
    if hasattr(source, "read"):
        payload = json.load(source)
    else:
        try:
            payload = json.loads(source)
        except (TypeError, ValueError):
            with open(source) as fh:
                payload = json.load(fh)
    return KMeansModel(
        k=int(payload["k"]),
        centroids=np.asarray(payload["centroids"], dtype=float),
        inertia=float(payload["inertia"]),
        seed=int(payload["seed"]),
        iterations_run=int(payload.get("iterations_run", 0)),
    )


def tagged_to_csv(tagged: list[TaggedWindow], path) -> None:
    """Write ``window_index,start_time,label,len1,...`` rows."""
    import csv

    if not tagged:
        raise ValueError("no tagged windows to write")
    k = len(tagged[0].features)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["window_index", "start_time", "label"]
            + [f"len{i + 1}" for i in range(k)]
        )
        for t in tagged:
            writer.writerow(
                [t.window_index, format(t.start_time, ".17g"), t.label]
                + [format(x, ".17g") for x in t.features]
            )


def tagged_from_csv(path) -> list[TaggedWindow]:
    import csv

    tagged = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:3] != ["window_index", "start_time", "label"]:
            raise ValueError(f"{path}: expected a tagged-windows CSV header")
        for row in reader:
            if not row:
                continue
            tagged.append(
                TaggedWindow(
                    window_index=int(row[0]),
                    start_time=float(row[1]),
                    label=int(row[2]),
                    features=tuple(float(x) for x in row[3:]),
                )
            )
    if not tagged:
        raise ValueError(f"{path}: no tagged rows")
    return tagged
