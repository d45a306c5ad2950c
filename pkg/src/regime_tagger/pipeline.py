"""End-to-end orchestration: sources -> windows -> diagrams -> features -> tags.

A pipeline run is driven by a JSON-serializable config; every stage writes
its artifact into the output directory and the run manifest records the
config snapshot, input checksums, stage outputs and wall times.  With fixed
seeds all artifacts except the manifest (which carries wall times) are
byte-identical across runs.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict

import numpy as np

from . import __version__ as _version
from .sim import (
    SdeSpec,
    euler_maruyama,
    hopf_field,
    lorenz_field,
    rk4_integrate,
)
from .embed import (
    TimeSeries,
    Window,
    sliding_windows,
    windows_to_csv,
    window_meta_to_csv,
)
from .ph import rips_filtration, compute_persistence, cap_infinite_bars, diagrams_to_csv
from .features import featurize_windows, features_to_csv
from .cluster import kmeans_fit, tag_windows, model_to_json, tagged_to_csv

__all__ = [
    "ConfigError",
    "DataError",
    "StageError",
    "SourceConfig",
    "WindowingConfig",
    "PersistenceConfig",
    "FeatureConfig",
    "ClusterConfig",
    "OutputConfig",
    "PipelineConfig",
    "RunManifest",
    "ingest_csv",
    "run_pipeline",
    "tag_report",
]

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid or unknown pipeline configuration."""


class DataError(ValueError):
    """Malformed input data (CSV ingestion, windowing sizes, ...)."""


class StageError(RuntimeError):
    """A pipeline stage failed; partial outputs have been removed."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


def _reject_unknown(section: str, given: dict, allowed) -> None:
    unknown = set(given) - set(allowed)
    if unknown:
        raise ConfigError(
            f"unknown keys in {section}: {sorted(unknown)} (allowed: {sorted(allowed)})"
        )


_SOURCE_FIELDS = {
    "lorenz": ("kind", "rho", "sigma", "beta", "dt", "t0", "t1", "x0", "transient"),
    "hopf": (
        "kind",
        "lambda0",
        "epsilon",
        "noise",
        "dt",
        "t0",
        "t1",
        "x0",
        "seed",
        "transient",
    ),
    "csv": ("kind", "path", "time_column", "value_columns", "interpolate"),
}


@dataclass(frozen=True)
class SourceConfig:
    """One data source: a builtin system or a CSV record."""

    kind: str
    # lorenz
    rho: float = 28.0
    sigma: float = 10.0
    beta: float = 8.0 / 3.0
    # hopf
    lambda0: float = -1.0
    epsilon: float = 1e-3
    noise: tuple[float, float] = (0.05, 0.05)
    seed: int | None = None
    # shared simulation controls
    dt: float = 0.01
    t0: float = 0.0
    t1: float = 100.0
    x0: tuple[float, ...] = ()
    transient: float = 0.0
    # csv
    path: str = ""
    time_column: str = ""
    value_columns: tuple[str, ...] = ()
    interpolate: bool = False

    @staticmethod
    def from_dict(d: dict) -> "SourceConfig":
        if not isinstance(d, dict) or "kind" not in d:
            raise ConfigError("each source needs a 'kind' (lorenz | hopf | csv)")
        kind = d["kind"]
        if kind not in _SOURCE_FIELDS:
            raise ConfigError(f"unknown source kind {kind!r}")
        _reject_unknown(f"source[{kind}]", d, _SOURCE_FIELDS[kind])
        args: dict = {"kind": kind}
        if kind == "lorenz":
            args["rho"] = float(d.get("rho", 28.0))
            args["sigma"] = float(d.get("sigma", 10.0))
            args["beta"] = float(d.get("beta", 8.0 / 3.0))
            args["dt"] = float(d.get("dt", 0.01))
            args["t0"] = float(d.get("t0", 0.0))
            args["t1"] = float(d.get("t1", 100.0))
            args["x0"] = tuple(float(v) for v in d.get("x0", (1.0, 1.0, 1.0)))
            args["transient"] = float(d.get("transient", 20.0))
            if len(args["x0"]) != 3:
                raise ConfigError("lorenz x0 must have 3 components")
        elif kind == "hopf":
            args["lambda0"] = float(d.get("lambda0", -1.0))
            args["epsilon"] = float(d.get("epsilon", 1e-3))
            noise = d.get("noise", (0.05, 0.05))
            if isinstance(noise, (int, float)):
                noise = (noise, noise)
            args["noise"] = tuple(float(v) for v in noise)
            args["seed"] = None if d.get("seed") is None else int(d["seed"])
            args["dt"] = float(d.get("dt", 0.01))
            args["t0"] = float(d.get("t0", 0.0))
            args["t1"] = float(d.get("t1", 2000.0))
            args["x0"] = tuple(float(v) for v in d.get("x0", (0.1, 0.1)))
            args["transient"] = float(d.get("transient", 0.0))
            if len(args["x0"]) != 2 or len(args["noise"]) != 2:
                raise ConfigError("hopf x0 and noise must have 2 components")
        else:
            if not d.get("path"):
                raise ConfigError("csv source needs a 'path'")
            args["path"] = str(d["path"])
            args["time_column"] = str(d.get("time_column", "t"))
            cols = d.get("value_columns", ())
            args["value_columns"] = tuple(str(c) for c in cols)
            args["interpolate"] = bool(d.get("interpolate", False))
            if not args["value_columns"]:
                raise ConfigError("csv source needs nonempty 'value_columns'")
        cfg = SourceConfig(**args)
        if cfg.kind != "csv":
            if cfg.dt <= 0:
                raise ConfigError("dt must be positive")
            if cfg.t1 <= cfg.t0:
                raise ConfigError("t1 must exceed t0")
            if cfg.transient < 0 or cfg.t0 + cfg.transient >= cfg.t1:
                raise ConfigError("transient must be >= 0 and end before t1")
        return cfg

    def to_dict(self) -> dict:
        keep = _SOURCE_FIELDS[self.kind]
        full = asdict(self)
        out = {k: full[k] for k in keep}
        for k, v in out.items():
            if isinstance(v, tuple):
                out[k] = list(v)
        return out


@dataclass(frozen=True)
class WindowingConfig:
    window_len: int = 100
    stride: int = 50
    mode: str = "auto"
    d: int = 2
    tau: int | None = None
    channel: int = 0
    sample_stride: int = 1


@dataclass(frozen=True)
class PersistenceConfig:
    max_dim: int = 1
    max_eps: float | None = None  # None: per-cloud max pairwise distance
    r: float = 2.0


@dataclass(frozen=True)
class FeatureConfig:
    k_lengths: int = 2
    dim: int = 1
    standardize: bool = False


@dataclass(frozen=True)
class ClusterConfig:
    k: int = 2
    seed: int = 42
    restarts: int = 10
    max_iter: int = 300
    tol: float = 1e-9


@dataclass(frozen=True)
class OutputConfig:
    out_dir: str = "out"
    plot_channel: int = 0


# windowing defaults differ for the hopf builtin: its oscillation period is
# ~2*pi time units, so windows must span several hundred samples at dt=0.01
_HOPF_WINDOWING = WindowingConfig(
    window_len=1600, stride=200, mode="raw", sample_stride=16
)


def _coerce(name: str, raw, template):
    if isinstance(template, bool):
        return bool(raw)
    if isinstance(template, int):
        if isinstance(raw, float) and raw != int(raw):
            raise ConfigError(f"{name} must be an integer, got {raw}")
        return int(raw)
    if isinstance(template, float):
        return float(raw)
    if isinstance(template, str):
        return str(raw)
    return raw


# fields whose default is None still need a type when a value is given
_OPTIONAL_FIELD_TEMPLATES = {"tau": 1, "max_eps": 1.0, "seed": 1}


def _section(cls, d: dict | None, name: str, defaults=None):
    base = defaults if defaults is not None else cls()
    if d is None:
        return base
    if not isinstance(d, dict):
        raise ConfigError(f"'{name}' section must be an object")
    _reject_unknown(name, d, tuple(cls.__dataclass_fields__))
    kwargs = {}
    for f_name in cls.__dataclass_fields__:
        if f_name not in d:
            kwargs[f_name] = getattr(base, f_name)
            continue
        raw = d[f_name]
        template = getattr(base, f_name)
        if template is None:
            template = _OPTIONAL_FIELD_TEMPLATES.get(f_name)
        if raw is None or template is None:
            kwargs[f_name] = raw
        else:
            kwargs[f_name] = _coerce(f"{name}.{f_name}", raw, template)
    return cls(**kwargs)


@dataclass(frozen=True)
class PipelineConfig:
    sources: tuple[SourceConfig, ...]
    windowing: WindowingConfig = WindowingConfig()
    persistence: PersistenceConfig = PersistenceConfig()
    features: FeatureConfig = FeatureConfig()
    clustering: ClusterConfig = ClusterConfig()
    output: OutputConfig = OutputConfig()

    @staticmethod
    def from_dict(d: dict) -> "PipelineConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        _reject_unknown(
            "config",
            d,
            ("source", "sources", "windowing", "persistence", "features", "clustering", "output"),
        )
        if "sources" in d and "source" in d:
            raise ConfigError("give either 'source' or 'sources', not both")
        raw_sources = d.get("sources", [d["source"]] if "source" in d else None)
        if not raw_sources:
            raise ConfigError("config needs at least one source")
        sources = tuple(SourceConfig.from_dict(s) for s in raw_sources)

        win_defaults = (
            _HOPF_WINDOWING if sources[0].kind == "hopf" else WindowingConfig()
        )
        cfg = PipelineConfig(
            sources=sources,
            windowing=_section(WindowingConfig, d.get("windowing"), "windowing", win_defaults),
            persistence=_section(PersistenceConfig, d.get("persistence"), "persistence"),
            features=_section(FeatureConfig, d.get("features"), "features"),
            clustering=_section(ClusterConfig, d.get("clustering"), "clustering"),
            output=_section(OutputConfig, d.get("output"), "output"),
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        w = self.windowing
        if w.window_len < 1 or w.stride < 1 or w.sample_stride < 1:
            raise ConfigError("window_len, stride and sample_stride must be >= 1")
        if w.mode not in ("auto", "raw", "delay"):
            raise ConfigError(f"unknown windowing mode {w.mode!r}")
        if w.d < 1 or (w.tau is not None and w.tau < 1):
            raise ConfigError("embedding d and tau must be >= 1")
        p = self.persistence
        if p.max_dim < 0:
            raise ConfigError("max_dim must be >= 0")
        if p.max_eps is not None and p.max_eps <= 0:
            raise ConfigError("max_eps must be positive when given")
        if p.r <= 0:
            raise ConfigError("cap margin r must be positive")
        f = self.features
        if f.k_lengths < 1 or f.dim < 0 or f.dim > p.max_dim:
            raise ConfigError("features need k_lengths >= 1 and 0 <= dim <= max_dim")
        c = self.clustering
        if c.k < 1 or c.restarts < 1 or c.max_iter < 1 or c.tol <= 0:
            raise ConfigError("clustering needs k, restarts, max_iter >= 1 and tol > 0")

    def to_dict(self) -> dict:
        def plain(obj):
            out = {}
            for k, v in asdict(obj).items():
                out[k] = list(v) if isinstance(v, tuple) else v
            return out

        return {
            "sources": [s.to_dict() for s in self.sources],
            "windowing": plain(self.windowing),
            "persistence": plain(self.persistence),
            "features": plain(self.features),
            "clustering": plain(self.clustering),
            "output": plain(self.output),
        }


@dataclass(frozen=True)
class RunManifest:
    """What a pipeline run did: config, inputs, artifacts, timings."""

    version: str
    config: dict
    input_checksums: tuple[str, ...]
    stages: tuple[dict, ...]
    source_window_ranges: tuple[tuple[int, int], ...]

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "config": self.config,
            "input_checksums": list(self.input_checksums),
            "stages": [dict(s) for s in self.stages],
            "source_window_ranges": [list(r) for r in self.source_window_ranges],
        }

    def write(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def ingest_csv(path, time_column: str, value_columns, interpolate: bool = False) -> TimeSeries:
    """Load a multichannel record from CSV.

    Rows are sorted ascending by time (stable for distinct times).  Empty
    or 'nan' cells are errors unless ``interpolate`` is set, in which case
    interior gaps are filled by linear interpolation (each fill is logged);
    non-finite values, duplicate timestamps and files with fewer than 2
    rows are always errors.
    """
    value_columns = list(value_columns)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in [time_column] + value_columns if c not in header]
        if missing:
            raise DataError(f"{path}: missing columns {missing} (header: {header})")
        times: list[float] = []
        values: list[list[float]] = []
        for line_no, row in enumerate(reader, start=2):
            cell = (row[time_column] or "").strip()
            try:
                t = float(cell)
            except ValueError:
                raise DataError(f"{path}:{line_no}: non-numeric time {cell!r}") from None
            if not math.isfinite(t):
                raise DataError(f"{path}:{line_no}: non-finite time {cell!r}")
            sample = []
            for col in value_columns:
                cell = (row[col] or "").strip()
                if cell == "" or cell.lower() == "nan":
                    if not interpolate:
                        raise DataError(
                            f"{path}:{line_no}: missing value in column {col!r} "
                            "(pass --interpolate to fill interior gaps)"
                        )
                    sample.append(math.nan)
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}:{line_no}: non-numeric value {cell!r} in column {col!r}"
                    ) from None
                if not math.isfinite(v) and not math.isnan(v):
                    raise DataError(f"{path}:{line_no}: non-finite value in column {col!r}")
                if math.isnan(v) and not interpolate:
                    raise DataError(f"{path}:{line_no}: missing value in column {col!r}")
                sample.append(v)
            times.append(t)
            values.append(sample)
    if len(times) < 2:
        raise DataError(f"{path}: need at least 2 data rows, got {len(times)}")
    t_arr = np.asarray(times)
    v_arr = np.asarray(values)
    order = np.argsort(t_arr, kind="stable")
    t_arr = t_arr[order]
    v_arr = v_arr[order]
    dupes = np.flatnonzero(np.diff(t_arr) == 0)
    if dupes.size:
        offenders = sorted({float(t_arr[i]) for i in dupes})
        raise DataError(f"{path}: duplicate timestamps {offenders[:10]}")
    if interpolate:
        for c in range(v_arr.shape[1]):
            col = v_arr[:, c]
            bad = np.isnan(col)
            if not bad.any():
                continue
            if bad[0] or bad[-1]:
                raise DataError(
                    f"{path}: column {value_columns[c]!r} has missing values at the "
                    "boundary; interpolation needs interior gaps"
                )
            good = ~bad
            filled = np.interp(t_arr[bad], t_arr[good], col[good])
            for t_fill, v_fill in zip(t_arr[bad], filled):
                logger.info(
                    "interpolated %s at t=%g -> %g", value_columns[c], t_fill, v_fill
                )
            col[bad] = filled
    return TimeSeries(t_arr, v_arr, tuple(value_columns))


def _simulate_source(src: SourceConfig, default_seed: int) -> TimeSeries:
    if src.kind == "lorenz":
        field_ = lorenz_field(sigma=src.sigma, rho=src.rho, beta=src.beta)
        traj = rk4_integrate(field_, np.asarray(src.x0), src.t0, src.t1, src.dt)
        names = ("x0", "x1", "x2")
    elif src.kind == "hopf":
        drift = hopf_field(src.lambda0, src.epsilon)
        spec = SdeSpec(drift=drift, noise_intensity=np.asarray(src.noise))
        seed = src.seed if src.seed is not None else default_seed
        traj = euler_maruyama(spec, np.asarray(src.x0), src.t0, src.t1, src.dt, seed=seed)
        names = ("x0", "x1")
    else:
        return ingest_csv(src.path, src.time_column, src.value_columns, src.interpolate)
    if src.transient > 0:
        keep = traj.times >= src.t0 + src.transient - 1e-12
        return TimeSeries(traj.times[keep], traj.states[keep], names)
    return TimeSeries(traj.times, traj.states, names)


def _series_to_csv(series: TimeSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + list(series.channel_names))
        for t, row in zip(series.times, series.values):
            writer.writerow([format(t, ".17g")] + [format(v, ".17g") for v in row])


def _parallel_map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


_PALETTE = ("#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee", "#aa3377", "#bbbbbb")


def _label_scatter_svg(times, values, labels, ylabel: str) -> str:
    """Minimal SVG scatter of window start time vs a channel summary,
    colored by cluster label."""
    width, height, margin = 800, 400, 50
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    t_lo, t_hi = float(t.min()), float(t.max())
    v_lo, v_hi = float(v.min()), float(v.max())
    t_span = (t_hi - t_lo) or 1.0
    v_span = (v_hi - v_lo) or 1.0

    def sx(x):
        return margin + (x - t_lo) / t_span * (width - 2 * margin)

    def sy(y):
        return height - margin - (y - v_lo) / v_span * (height - 2 * margin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" '
        'stroke="black"/>',
        f'<text x="{width // 2}" y="{height - 12}" text-anchor="middle" '
        'font-size="13">start_time</text>',
        f'<text x="14" y="{height // 2}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 14 {height // 2})">{ylabel}</text>',
        f'<text x="{margin}" y="{height - margin + 16}" font-size="11" '
        f'text-anchor="middle">{t_lo:.6g}</text>',
        f'<text x="{width - margin}" y="{height - margin + 16}" font-size="11" '
        f'text-anchor="middle">{t_hi:.6g}</text>',
        f'<text x="{margin - 6}" y="{height - margin}" font-size="11" '
        f'text-anchor="end">{v_lo:.6g}</text>',
        f'<text x="{margin - 6}" y="{margin + 4}" font-size="11" '
        f'text-anchor="end">{v_hi:.6g}</text>',
    ]
    for ti, vi, li in zip(t, v, labels):
        color = _PALETTE[int(li) % len(_PALETTE)]
        parts.append(
            f'<circle cx="{sx(ti):.2f}" cy="{sy(vi):.2f}" r="3" fill="{color}"/>'
        )
    for li in sorted(set(int(l) for l in labels)):
        color = _PALETTE[li % len(_PALETTE)]
        y = margin + 16 * li
        parts.append(
            f'<rect x="{width - margin - 60}" y="{y}" width="10" height="10" fill="{color}"/>'
        )
        parts.append(
            f'<text x="{width - margin - 44}" y="{y + 9}" font-size="12">label {li}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _checksum(src: SourceConfig) -> str:
    h = hashlib.sha256()
    if src.kind == "csv":
        with open(src.path, "rb") as fh:
            for chunk in iter(lambda: fh.read(65536), b""):
                h.update(chunk)
    else:
        h.update(json.dumps(src.to_dict(), sort_keys=True).encode())
    return h.hexdigest()


def run_pipeline(config: PipelineConfig, workers: int | None = None) -> RunManifest:
    """Run every stage and return the manifest.

    Stage artifacts: series_<i>.csv per source, windows.csv +
    window_meta.csv, diagrams.csv, features.csv, model.json, tagged.csv,
    plot.svg, manifest.json.  On a stage failure all files created so far
    are removed and a StageError naming the stage propagates.
    """
    if workers is None:
        workers = os.cpu_count() or 1
    out_dir = config.output.out_dir
    os.makedirs(out_dir, exist_ok=True)
    created: list[str] = []
    stages: list[dict] = []

    def path_of(name: str) -> str:
        return os.path.join(out_dir, name)

    def run_stage(name: str, fn):
        start = time.perf_counter()
        try:
            outputs = fn()
        except BaseException as exc:
            for p in created:
                try:
                    os.remove(p)
                except OSError:
                    pass
            raise StageError(name, exc) from exc
        created.extend(outputs)
        stages.append(
            {
                "name": name,
                "outputs": [os.path.basename(p) for p in outputs],
                "seconds": round(time.perf_counter() - start, 6),
            }
        )

    state: dict = {}

    def stage_sources():
        series = [
            _simulate_source(src, default_seed=config.clustering.seed)
            for src in config.sources
        ]
        outputs = []
        for i, s in enumerate(series):
            p = path_of(f"series_{i}.csv")
            _series_to_csv(s, p)
            outputs.append(p)
        state["series"] = series
        return outputs

    def stage_window():
        w = config.windowing
        windows: list[Window] = []
        source_ids: list[int] = []
        ranges: list[tuple[int, int]] = []
        for i, s in enumerate(state["series"]):
            begin = len(windows)
            wins = sliding_windows(
                s,
                window_len=w.window_len,
                stride=w.stride,
                mode=w.mode,
                d=w.d,
                tau=w.tau,
                channel=w.channel,
                sample_stride=w.sample_stride,
            )
            windows.extend(wins)
            source_ids.extend([i] * len(wins))
            ranges.append((begin, len(windows)))
        state["windows"] = windows
        state["source_ids"] = source_ids
        state["ranges"] = ranges
        # per-window summary of the plot channel, for the final scatter
        ch = config.output.plot_channel
        means = []
        for s_id, win in zip(source_ids, windows):
            series = state["series"][s_id]
            block = series.values[win.start_index : win.start_index + w.window_len, ch]
            means.append(float(block.mean()))
        state["plot_values"] = means
        state["plot_channel_name"] = state["series"][0].channel_names[ch]
        p_w, p_m = path_of("windows.csv"), path_of("window_meta.csv")
        windows_to_csv(windows, p_w)
        window_meta_to_csv(windows, p_m, source_ids=source_ids)
        return [p_w, p_m]

    def stage_persist():
        p_cfg = config.persistence

        def diagram_of(window: Window):
            filt = rips_filtration(
                window.cloud, max_eps=p_cfg.max_eps, max_dim=p_cfg.max_dim
            )
            diag = compute_persistence(filt)
            if p_cfg.r != diag.r:
                diag = cap_infinite_bars(diag, t_max=diag.t_max, r=p_cfg.r)
            return diag

        diagrams = _parallel_map(diagram_of, state["windows"], workers)
        state["diagrams"] = diagrams
        p = path_of("diagrams.csv")
        diagrams_to_csv(diagrams, p)
        return [p]

    def stage_featurize():
        f_cfg = config.features
        start_times = [w.start_time for w in state["windows"]]
        vectors = featurize_windows(
            state["diagrams"],
            k=f_cfg.k_lengths,
            dim=f_cfg.dim,
            start_times=start_times,
            standardize=f_cfg.standardize,
        )
        state["features"] = vectors
        p = path_of("features.csv")
        features_to_csv(vectors, p)
        return [p]

    def stage_tag():
        c = config.clustering
        model = kmeans_fit(
            state["features"],
            k=c.k,
            seed=c.seed,
            max_iter=c.max_iter,
            tol=c.tol,
            restarts=c.restarts,
        )
        tagged = tag_windows(model, state["features"])
        state["model"] = model
        state["tagged"] = tagged
        p_model, p_tagged = path_of("model.json"), path_of("tagged.csv")
        model_to_json(model, p_model)
        tagged_to_csv(tagged, p_tagged)
        return [p_model, p_tagged]

    def stage_plot():
        labels = [t.label for t in state["tagged"]]
        times = [t.start_time for t in state["tagged"]]
        svg = _label_scatter_svg(
            times, state["plot_values"], labels,
            ylabel=f"mean {state['plot_channel_name']}",
        )
        p = path_of("plot.svg")
        with open(p, "w") as fh:
            fh.write(svg)
        return [p]

    run_stage("sources", stage_sources)
    run_stage("window", stage_window)
    run_stage("persist", stage_persist)
    run_stage("featurize", stage_featurize)
    run_stage("tag", stage_tag)
    run_stage("plot", stage_plot)

    manifest = RunManifest(
        version=_version,
        config=config.to_dict(),
        input_checksums=tuple(_checksum(s) for s in config.sources),
        stages=tuple(stages),
        source_window_ranges=tuple(state["ranges"]),
    )
    manifest.write(path_of("manifest.json"))
    return manifest


def tag_report(tagged) -> dict:
    """Summary of a tagged-window sequence: per-label counts, label
    run-lengths, and transition times (start_time of the first window of
    each new label run)."""
    from .cluster import tagged_from_csv

    if isinstance(tagged, (str, os.PathLike)):
        tagged = tagged_from_csv(tagged)
    if not tagged:
        raise DataError("no tagged windows to report on")
    tagged = sorted(tagged, key=lambda t: t.window_index)
    labels = [t.label for t in tagged]
    counts: dict[str, int] = {}
    for lab in labels:
        counts[str(lab)] = counts.get(str(lab), 0) + 1
    runs: list[dict] = []
    transitions: list[dict] = []
    for t in tagged:
        if runs and runs[-1]["label"] == t.label:
            runs[-1]["count"] += 1
        else:
            if runs:
                transitions.append(
                    {
                        "time": t.start_time,
                        "from": runs[-1]["label"],
                        "to": t.label,
                    }
                )
            runs.append({"label": t.label, "count": 1, "start_time": t.start_time})
    return {
        "n_windows": len(tagged),
        "label_counts": counts,
        "run_lengths": runs,
        "transitions": transitions,
    }
