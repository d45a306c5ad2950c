"""Command-line interface.

Subcommands mirror the pipeline stages (simulate, embed, persist,
featurize, tag, report) plus `pipeline`, which runs everything from a JSON
config.  Global knobs: --seed, --workers, --out-dir, each also settable
via REGIME_TAGGER_SEED / REGIME_TAGGER_WORKERS / REGIME_TAGGER_OUT_DIR
(a flag wins over the environment, which wins over the config file).

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric divergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .sim import (
    DivergenceError,
    SdeSpec,
    euler_maruyama,
    hopf_field,
    lorenz_field,
    rk4_integrate,
    trajectory_to_csv,
)
from .embed import sliding_windows, windows_to_csv, windows_from_csv, window_meta_to_csv, window_meta_from_csv
from .ph import rips_filtration, compute_persistence, cap_infinite_bars, diagrams_to_csv, diagrams_from_csv
from .features import featurize_windows, features_to_csv, features_from_csv
from .cluster import kmeans_fit, tag_windows, model_to_json, tagged_to_csv
from .pipeline import (
    ConfigError,
    DataError,
    PipelineConfig,
    StageError,
    ingest_csv,
    run_pipeline,
    tag_report,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGENCE = 4


def _env_default(name: str, cast, fallback):
    raw = os.environ.get(f"REGIME_TAGGER_{name}")
    if raw is None:
        return fallback
    try:
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"REGIME_TAGGER_{name}={raw!r}: {exc}") from exc


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


def _names(text: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _add_global_args(parser: argparse.ArgumentParser, suppress: bool) -> None:
    # on subparsers the defaults are suppressed so a flag given before the
    # subcommand is not clobbered by the subparser's default
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=d, help="global seed (simulation + clustering)")
    parser.add_argument("--workers", type=int, default=d, help="worker pool size for per-window stages")
    parser.add_argument("--out-dir", default=d, help="output directory for the pipeline subcommand")
    parser.add_argument(
        "-v", "--verbose", action="store_true",
        default=argparse.SUPPRESS if suppress else False,
        help="log interpolation fills and stage progress",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regime-tagger",
        description="Topological regime tagging for time series from dynamical systems.",
    )
    _add_global_args(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate a builtin system to a trajectory CSV")
    _add_global_args(p, suppress=True)
    p.add_argument("--system", choices=("lorenz", "hopf"), required=True)
    p.add_argument("--rho", type=float, default=28.0)
    p.add_argument("--sigma", type=float, default=10.0)
    p.add_argument("--beta", type=float, default=8.0 / 3.0)
    p.add_argument("--lambda0", type=float, default=-1.0)
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--noise", type=_floats, default=(0.05, 0.05), help="per-coordinate sigma, comma separated")
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t1", type=float, default=None, help="default: 100 (lorenz) or 2000 (hopf)")
    p.add_argument("--x0", type=_floats, default=None, help="initial state, comma separated")
    p.add_argument("--transient", type=float, default=None, help="initial span to drop; default 20 (lorenz) / 0 (hopf)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("embed", help="cut a series CSV into windowed point clouds")
    _add_global_args(p, suppress=True)
    p.add_argument("--input", required=True)
    p.add_argument("--time-column", default="t")
    p.add_argument("--value-columns", type=_names, default=None, help="default: every non-time column")
    p.add_argument("--interpolate", action="store_true", help="fill interior gaps by linear interpolation")
    p.add_argument("--window-len", type=int, default=100)
    p.add_argument("--stride", type=int, default=50)
    p.add_argument("--mode", choices=("auto", "raw", "delay"), default="auto")
    p.add_argument("--d", type=int, default=2, help="delay embedding dimension")
    p.add_argument("--tau", type=int, default=None, help="delay lag in samples (default: first autocorrelation zero)")
    p.add_argument("--channel", type=int, default=0)
    p.add_argument("--sample-stride", type=int, default=1)
    p.add_argument("--out-windows", required=True)
    p.add_argument("--out-meta", default=None, help="window metadata CSV (default: window_meta.csv beside windows)")

    p = sub.add_parser("persist", help="persistence diagrams for a windows CSV")
    _add_global_args(p, suppress=True)
    p.add_argument("--windows", required=True)
    p.add_argument("--max-dim", type=int, default=1)
    p.add_argument("--max-eps", type=float, default=None)
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("featurize", help="top persistence lengths per window")
    _add_global_args(p, suppress=True)
    p.add_argument("--diagrams", required=True)
    p.add_argument("--meta", default=None, help="window metadata CSV for start times")
    p.add_argument("--k-lengths", type=int, default=2)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--out", required=True)

    p = sub.add_parser("tag", help="fit k-means and tag the feature vectors")
    _add_global_args(p, suppress=True)
    p.add_argument("--features", required=True)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--max-iter", type=int, default=300)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--out-model", required=True)
    p.add_argument("--out-tagged", required=True)

    p = sub.add_parser("report", help="summarize a tagged CSV (counts, runs, transitions)")
    _add_global_args(p, suppress=True)
    p.add_argument("--tagged", required=True)
    p.add_argument("--out", default=None, help="write JSON here instead of stdout")

    p = sub.add_parser("pipeline", help="run the full pipeline from a JSON config")
    _add_global_args(p, suppress=True)
    p.add_argument("--config", default=None, help="config JSON path")
    p.add_argument("--builtin", choices=("lorenz", "hopf", "vostok"), default=None,
                   help="shorthand: default config for a builtin source (vostok: shipped fixture)")
    p.add_argument("--rho", type=float, default=None, help="override lorenz rho")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--window-len", type=int, default=None)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--sample-stride", type=int, default=None)
    p.add_argument("--mode", choices=("auto", "raw", "delay"), default=None)
    p.add_argument("--max-dim", type=int, default=None)
    p.add_argument("--k-lengths", type=int, default=None)
    p.add_argument("--feature-dim", type=int, default=None)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--restarts", type=int, default=None)
    return parser


def _cmd_simulate(args) -> None:
    if args.system == "lorenz":
        t1 = 100.0 if args.t1 is None else args.t1
        x0 = (1.0, 1.0, 1.0) if args.x0 is None else args.x0
        transient = 20.0 if args.transient is None else args.transient
        field = lorenz_field(sigma=args.sigma, rho=args.rho, beta=args.beta)
        traj = rk4_integrate(field, np.asarray(x0), args.t0, t1, args.dt)
    else:
        t1 = 2000.0 if args.t1 is None else args.t1
        x0 = (0.1, 0.1) if args.x0 is None else args.x0
        transient = 0.0 if args.transient is None else args.transient
        spec = SdeSpec(drift=hopf_field(args.lambda0, args.epsilon),
                       noise_intensity=np.asarray(args.noise))
        seed = 42 if args.seed is None else args.seed
        traj = euler_maruyama(spec, np.asarray(x0), args.t0, t1, args.dt, seed=seed)
    if transient > 0:
        keep = traj.times >= args.t0 + transient - 1e-12
        from .sim import Trajectory

        traj = Trajectory(traj.times[keep], traj.states[keep], seed=traj.seed)
    trajectory_to_csv(traj, args.out)


def _cmd_embed(args) -> None:
    value_columns = args.value_columns
    if value_columns is None:
        import csv as _csv

        with open(args.input, newline="") as fh:
            header = next(_csv.reader(fh))
        value_columns = tuple(c for c in header if c != args.time_column)
    series = ingest_csv(args.input, args.time_column, value_columns, args.interpolate)
    windows = sliding_windows(
        series,
        window_len=args.window_len,
        stride=args.stride,
        mode=args.mode,
        d=args.d,
        tau=args.tau,
        channel=args.channel,
        sample_stride=args.sample_stride,
    )
    windows_to_csv(windows, args.out_windows)
    meta_path = args.out_meta or os.path.join(
        os.path.dirname(os.path.abspath(args.out_windows)), "window_meta.csv"
    )
    window_meta_to_csv(windows, meta_path)


def _cmd_persist(args, workers: int) -> None:
    clouds = windows_from_csv(args.windows)

    def diagram_of(cloud):
        diag = compute_persistence(
            rips_filtration(cloud, max_eps=args.max_eps, max_dim=args.max_dim)
        )
        if args.r != diag.r:
            diag = cap_infinite_bars(diag, t_max=diag.t_max, r=args.r)
        return diag

    from .pipeline import _parallel_map

    diagrams = _parallel_map(diagram_of, clouds, workers)
    diagrams_to_csv(diagrams, args.out)


def _cmd_featurize(args) -> None:
    diagrams = diagrams_from_csv(args.diagrams)
    start_times = None
    if args.meta:
        meta = window_meta_from_csv(args.meta)
        if len(meta) != len(diagrams):
            raise DataError(
                f"metadata has {len(meta)} windows but diagrams have {len(diagrams)}"
            )
        start_times = [m["start_time"] for m in meta]
    else:
        logging.getLogger(__name__).warning(
            "no --meta given; feature start_time column will be 0"
        )
    vectors = featurize_windows(
        diagrams,
        k=args.k_lengths,
        dim=args.dim,
        start_times=start_times,
        standardize=args.standardize,
    )
    features_to_csv(vectors, args.out)


def _cmd_tag(args, seed: int) -> None:
    vectors = features_from_csv(args.features)
    model = kmeans_fit(
        vectors,
        k=args.k,
        seed=seed,
        max_iter=args.max_iter,
        tol=args.tol,
        restarts=args.restarts,
    )
    model_to_json(model, args.out_model)
    tagged_to_csv(tag_windows(model, vectors), args.out_tagged)


def _cmd_report(args) -> None:
    summary = tag_report(args.tagged)
    text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _builtin_config(name: str) -> dict:
    if name == "lorenz":
        return {"source": {"kind": "lorenz", "rho": 23.5}}
    if name == "hopf":
        return {"source": {"kind": "hopf"}}
    data = os.path.join(os.path.dirname(__file__), "data", "vostok_like.csv")
    return {
        "source": {
            "kind": "csv",
            "path": data,
            "time_column": "age",
            "value_columns": ["temp", "co2"],
        },
        "windowing": {"window_len": 20, "stride": 10, "mode": "raw"},
        "clustering": {"k": 3},
    }


def _cmd_pipeline(args, seed: int | None, workers: int, out_dir: str | None) -> None:
    if args.config and args.builtin:
        raise ConfigError("give either --config or --builtin, not both")
    if args.config:
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config} is not valid JSON: {exc}") from exc
    elif args.builtin:
        raw = _builtin_config(args.builtin)
    else:
        raise ConfigError("pipeline needs --config or --builtin")

    # flag overrides (flag wins over config file)
    def patch(section: str, key: str, value):
        if value is not None:
            raw.setdefault(section, {})[key] = value

    if args.rho is not None:
        sources = raw.get("sources") or [raw.get("source", {})]
        for s in sources:
            if s.get("kind") == "lorenz":
                s["rho"] = args.rho
    patch("windowing", "window_len", args.window_len)
    patch("windowing", "stride", args.stride)
    patch("windowing", "sample_stride", args.sample_stride)
    patch("windowing", "mode", args.mode)
    patch("persistence", "max_dim", args.max_dim)
    patch("persistence", "r", args.r)
    patch("features", "k_lengths", args.k_lengths)
    patch("features", "dim", args.feature_dim)
    patch("clustering", "k", args.k)
    patch("clustering", "restarts", args.restarts)
    if seed is not None:
        raw.setdefault("clustering", {})["seed"] = seed
    if out_dir is not None:
        raw.setdefault("output", {})["out_dir"] = out_dir

    config = PipelineConfig.from_dict(raw)
    run_pipeline(config, workers=workers)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        seed = args.seed if args.seed is not None else _env_default("SEED", int, None)
        workers = (
            args.workers
            if args.workers is not None
            else _env_default("WORKERS", int, os.cpu_count() or 1)
        )
        out_dir = (
            args.out_dir if args.out_dir is not None else _env_default("OUT_DIR", str, None)
        )
        if args.command == "simulate":
            if seed is not None:
                args.seed = seed
            _cmd_simulate(args)
        elif args.command == "embed":
            _cmd_embed(args)
        elif args.command == "persist":
            _cmd_persist(args, workers)
        elif args.command == "featurize":
            _cmd_featurize(args)
        elif args.command == "tag":
            _cmd_tag(args, seed if seed is not None else 42)
        elif args.command == "report":
            _cmd_report(args)
        elif args.command == "pipeline":
            _cmd_pipeline(args, seed, workers, out_dir)
        return EXIT_OK
    except StageError as exc:
        cause = exc.cause
        sys.stderr.write(f"error: {exc}\n")
        if isinstance(cause, DivergenceError):
            return EXIT_DIVERGENCE
        if isinstance(cause, ConfigError):
            return EXIT_CONFIG
        return EXIT_DATA
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except DivergenceError as exc:
        sys.stderr.write(f"divergence: {exc}\n")
        return EXIT_DIVERGENCE
    except (DataError, ValueError, OSError) as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return EXIT_DATA


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
