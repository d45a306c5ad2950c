"""Reduce persistence diagrams to fixed-length top-bar-length vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ph import PersistenceDiagram

__all__ = [
    "FeatureVector",
    "top_persistence_lengths",
    "featurize_windows",
    "features_to_csv",
    "features_from_csv",
]


@dataclass(frozen=True)
class FeatureVector:
    """Top-k bar lengths of one window, sorted descending, zero-padded."""

    window_index: int
    start_time: float
    lengths: tuple[float, ...]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.lengths)


def top_persistence_lengths(
    diagram: PersistenceDiagram,
    k: int,
    dim: int = 1,
    window_index: int = 0,
    start_time: float = 0.0,
) -> FeatureVector:
    """The k longest bar lengths in one homology degree.

    Capped bars count with their capped death; zero-length bars are
    excluded; missing bars pad with 0 so the vector always has k entries.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    lengths = sorted((b.length for b in diagram.in_dim(dim)), reverse=True)
    lengths = lengths[:k] + [0.0] * max(0, k - len(lengths))
    return FeatureVector(
        window_index=window_index, start_time=start_time, lengths=tuple(lengths)
    )


def featurize_windows(
    diagrams: list[PersistenceDiagram],
    k: int = 2,
    dim: int = 1,
    start_times=None,
    standardize: bool = False,
) -> list[FeatureVector]:
    """Map diagrams to feature vectors, preserving window order.

    ``standardize=True`` z-scores each feature column across windows
    (constant columns are left as zero); off by default so features keep
    their common unit, the filtration scale.
    """
    if not diagrams:
        raise ValueError("no diagrams to featurize")
    if start_times is None:
        start_times = [0.0] * len(diagrams)
    if len(start_times) != len(diagrams):
        raise ValueError("start_times must match diagrams")
    vectors = [
        top_persistence_lengths(d, k=k, dim=dim, window_index=i, start_time=float(t))
        for i, (d, t) in enumerate(zip(diagrams, start_times))
    ]
    if standardize:
        data = np.array([v.lengths for v in vectors])
        mean = data.mean(axis=0)
        std = data.std(axis=0)
        std[std == 0.0] = 1.0
        data = (data - mean) / std
        vectors = [
            FeatureVector(v.window_index, v.start_time, tuple(row))
            for v, row in zip(vectors, data)
        ]
    return vectors


def features_to_csv(vectors: list[FeatureVector], path) -> None:
    """Write ``window_index,start_time,len1,...,lenk`` rows."""
    import csv

    if not vectors:
        raise ValueError("no feature vectors to write")
    k = len(vectors[0].lengths)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["window_index", "start_time"] + [f"len{i + 1}" for i in range(k)]
        )
        for v in vectors:
            writer.writerow(
                [v.window_index, format(v.start_time, ".17g")]
                + [format(x, ".17g") for x in v.lengths]
            )


def features_from_csv(path) -> list[FeatureVector]:
    import csv

    vectors = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["window_index", "start_time"]:
            raise ValueError(f"{path}: expected a features CSV header")
        for row in reader:
            if not row:
                continue
            vectors.append(
                FeatureVector(
                    window_index=int(row[0]),
                    start_time=float(row[1]),
                    lengths=tuple(float(x) for x in row[2:]),
                )
            )
    if not vectors:
        raise ValueError(f"{path}: no feature rows")
    return vectors
