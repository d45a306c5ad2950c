"""Turn trajectories and time series into analysis windows and point clouds.

Every point of every cloud is a sample (or a delay tuple of samples) of the
source; nothing here interpolates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sim import Trajectory

__all__ = [
    "TimeSeries",
    "PointCloud",
    "Window",
    "project",
    "trajectory_to_series",
    "delay_embed",
    "default_delay",
    "sliding_windows",
    "windows_to_csv",
    "windows_from_csv",
    "window_meta_to_csv",
    "window_meta_from_csv",
]


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly or irregularly indexed multichannel observations."""

    times: np.ndarray
    values: np.ndarray
    channel_names: tuple[str, ...]

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if times.ndim != 1 or times.size < 2:
            raise ValueError("a time series needs at least 2 samples")
        if values.shape[0] != times.size:
            raise ValueError("values must have one row per time stamp")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(values)) or not np.all(np.isfinite(times)):
            raise ValueError("time series entries must be finite")
        names = tuple(self.channel_names)
        if len(names) != values.shape[1]:
            raise ValueError("channel_names must match the number of channels")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "channel_names", names)

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.times.size


@dataclass(frozen=True)
class PointCloud:
    """Finite set of points in d-dimensional Euclidean space."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError("points must be a nonempty (m, d) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class Window:
    """One analysis window: where it starts and the cloud built from it."""

    start_index: int
    start_time: float
    cloud: PointCloud


def trajectory_to_series(trajectory: Trajectory) -> TimeSeries:
    """View a trajectory as a multichannel time series named x0, x1, ..."""
    names = tuple(f"x{i}" for i in range(trajectory.dim))
    return TimeSeries(trajectory.times, trajectory.states, names)


def project(trajectory: Trajectory, channel: int) -> TimeSeries:
    """Scalar series of one coordinate of a trajectory."""
    if not 0 <= channel < trajectory.dim:
        raise IndexError(
            f"channel {channel} out of range for a {trajectory.dim}-dim trajectory"
        )
    return TimeSeries(
        trajectory.times, trajectory.states[:, channel], (f"x{channel}",)
    )


def _scalar_values(series) -> np.ndarray:
    if isinstance(series, TimeSeries):
        if series.n_channels != 1:
            raise ValueError("delay embedding needs a scalar (1-channel) series")
        return series.values[:, 0]
    arr = np.asarray(series, dtype=float)
    if arr.ndim != 1:
        raise ValueError("delay embedding needs a 1-D value array")
    return arr


def delay_embed(series, d: int, tau: int) -> PointCloud:
    """Delay-coordinate cloud: point j = (z_j, z_{j+tau}, ..., z_{j+(d-1)tau}).

    Produces exactly N - (d-1)*tau points; the series must be longer than
    (d-1)*tau samples.
    """
    z = _scalar_values(series)
    if d < 1:
        raise ValueError("embedding dimension d must be >= 1")
    if tau < 1:
        raise ValueError("lag tau must be >= 1")
    n = z.size
    m = n - (d - 1) * tau
    if m <= 0:
        raise ValueError(
            f"series of length {n} is too short for d={d}, tau={tau}; "
            f"need at least {(d - 1) * tau + 1} samples"
        )
    idx = np.arange(m)[:, None] + tau * np.arange(d)[None, :]
    return PointCloud(z[idx])


def default_delay(values: np.ndarray, cap: int) -> int:
    """First zero crossing of the autocorrelation, capped and at least 1."""
    z = np.asarray(values, dtype=float)
    z = z - z.mean()
    denom = float(z @ z)
    cap = max(1, cap)
    if denom == 0.0:
        return 1
    for lag in range(1, min(cap, z.size - 1) + 1):
        if float(z[:-lag] @ z[lag:]) / denom <= 0.0:
            return lag
    return cap


def sliding_windows(
    source,
    window_len: int = 100,
    stride: int = 50,
    mode: str = "auto",
    d: int = 2,
    tau: int | None = None,
    channel: int = 0,
    sample_stride: int = 1,
) -> list[Window]:
    """Cut a series (or trajectory) into overlapping windows of point clouds.

    Windows start at indices 0, stride, 2*stride, ... while fully contained.
    ``mode='raw'`` uses the multichannel samples directly as points;
    ``mode='delay'`` delay-embeds the chosen scalar channel inside each
    window; ``'auto'`` picks raw for multichannel sources and delay for
    scalar ones.  ``sample_stride`` keeps every s-th sample of a window when
    building its cloud (1 keeps all), so long windows can still produce
    small clouds.
    """
    if isinstance(source, Trajectory):
        source = trajectory_to_series(source)
    if not isinstance(source, TimeSeries):
        raise TypeError("source must be a TimeSeries or Trajectory")
    n = len(source)
    if window_len > n:
        raise ValueError(f"window_len {window_len} exceeds series length {n}")
    if window_len < 1 or stride < 1 or sample_stride < 1:
        raise ValueError("window_len, stride and sample_stride must be >= 1")
    if mode == "auto":
        mode = "raw" if source.n_channels >= 2 else "delay"
    if mode not in ("raw", "delay"):
        raise ValueError(f"unknown windowing mode {mode!r}")

    if mode == "delay":
        if not 0 <= channel < source.n_channels:
            raise IndexError(f"channel {channel} out of range")
        z_full = source.values[::sample_stride, channel]
        if tau is None:
            tau = default_delay(z_full, cap=max(1, window_len // (4 * sample_stride)))
        eff_len = (window_len - 1) // sample_stride + 1
        if eff_len < 2 * (d - 1) * tau:
            raise ValueError(
                f"window of {eff_len} samples is shorter than 2(d-1)tau = "
                f"{2 * (d - 1) * tau}; widen the window or shrink d/tau"
            )

    windows = []
    for start in range(0, n - window_len + 1, stride):
        block = source.values[start : start + window_len : sample_stride]
        if mode == "raw":
            cloud = PointCloud(block)
        else:
            cloud = delay_embed(block[:, channel], d=d, tau=tau)
        windows.append(
            Window(start_index=start, start_time=float(source.times[start]), cloud=cloud)
        )
    return windows


def windows_to_csv(windows: list[Window], path) -> None:
    """Write ``window_index,point_index,coord0,...`` rows."""
    import csv

    if not windows:
        raise ValueError("no windows to write")
    dim = windows[0].cloud.dim
    if any(w.cloud.dim != dim for w in windows):
        raise ValueError("windows CSV needs a common point dimension across windows")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window_index", "point_index"] + [f"coord{i}" for i in range(dim)])
        for w_idx, window in enumerate(windows):
            for p_idx, point in enumerate(window.cloud.points):
                writer.writerow(
                    [w_idx, p_idx] + [format(v, ".17g") for v in point]
                )


def windows_from_csv(path) -> list[PointCloud]:
    """Load the clouds of a windows CSV, ordered by window index."""
    import csv

    clouds: dict[int, list[list[float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["window_index", "point_index"]:
            raise ValueError(f"{path}: expected a windows CSV header")
        for row in reader:
            if not row:
                continue
            clouds.setdefault(int(row[0]), []).append([float(v) for v in row[2:]])
    if not clouds:
        raise ValueError(f"{path}: no window rows")
    indices = sorted(clouds)
    if indices != list(range(len(indices))):
        raise ValueError(f"{path}: window indices are not contiguous from 0")
    return [PointCloud(np.asarray(clouds[i])) for i in indices]


def window_meta_to_csv(windows: list[Window], path, source_ids=None) -> None:
    """Companion metadata: ``window_index,source,start_index,start_time``."""
    import csv

    if source_ids is None:
        source_ids = [0] * len(windows)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window_index", "source", "start_index", "start_time"])
        for w_idx, (window, src) in enumerate(zip(windows, source_ids)):
            writer.writerow(
                [w_idx, src, window.start_index, format(window.start_time, ".17g")]
            )


def window_meta_from_csv(path) -> list[dict]:
    import csv

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = [
            {
                "window_index": int(r["window_index"]),
                "source": int(r["source"]),
                "start_index": int(r["start_index"]),
                "start_time": float(r["start_time"]),
            }
            for r in reader
        ]
    if not rows:
        raise ValueError(f"{path}: no metadata rows")
    return rows
