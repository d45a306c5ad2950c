"""Synthetic two-channel records shaped like the ice-core data.

The real temperature/CO2 record is externally licensed, so tests and demos
use a generated stand-in: a stationary stretch plus two loop-bearing
regimes (the channels trace phase-lagged cycles of different radii, which
is how lead-lag structure shows up in the plane of the two channels).
Files with the same column layout from real sources work unmodified.
"""

from __future__ import annotations

import csv

import numpy as np

from .embed import TimeSeries

__all__ = ["make_vostok_like", "write_vostok_like_csv", "VOSTOK_SEGMENTS"]

# (kind, length, params); planted regime label = segment position
VOSTOK_SEGMENTS = (
    ("flat", 200, {"center": (0.0, 0.0), "noise": 0.05}),
    ("loop", 200, {"center": (1.0, 0.8), "radius": 0.5, "period": 20, "noise": 0.04}),
    ("loop", 200, {"center": (-0.5, 1.5), "radius": 2.0, "period": 10, "noise": 0.06}),
)


def make_vostok_like(seed: int = 2024, segments=VOSTOK_SEGMENTS):
    """Two-channel series with planted regimes.

    Returns (series, labels) where labels[i] is the regime index of
    sample i.  Loop segments put the second channel a quarter period
    behind the first, giving the small spirals in the channel plane.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    temp_parts, co2_parts, label_parts = [], [], []
    for seg_idx, (kind, length, p) in enumerate(segments):
        cx, cy = p["center"]
        jitter = rng.standard_normal((length, 2)) * p["noise"]
        if kind == "flat":
            t = np.full(length, cx)
            c = np.full(length, cy)
        elif kind == "loop":
            phase = 2.0 * np.pi * np.arange(length) / p["period"]
            t = cx + p["radius"] * np.cos(phase)
            c = cy + p["radius"] * np.sin(phase)
        else:
            raise ValueError(f"unknown segment kind {kind!r}")
        temp_parts.append(t + jitter[:, 0])
        co2_parts.append(c + jitter[:, 1])
        label_parts.append(np.full(length, seg_idx, dtype=np.int64))
    temp = np.concatenate(temp_parts)
    co2 = np.concatenate(co2_parts)
    labels = np.concatenate(label_parts)
    times = np.arange(temp.size, dtype=float)
    series = TimeSeries(times, np.stack([temp, co2], axis=1), ("temp", "co2"))
    return series, labels


def write_vostok_like_csv(path, seed: int = 2024) -> None:
    """Write the fixture as ``age,temp,co2`` rows."""
    series, _ = make_vostok_like(seed=seed)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["age", "temp", "co2"])
        for t, (temp, co2) in zip(series.times, series.values):
            writer.writerow(
                [format(t, ".17g"), format(temp, ".17g"), format(co2, ".17g")]
            )
