import json
import logging
import os

import numpy as np
import pytest

from regime_tagger.cluster import TaggedWindow, tagged_from_csv
from regime_tagger.embed import windows_from_csv
from regime_tagger.features import features_from_csv
from regime_tagger.fixtures import make_vostok_like, write_vostok_like_csv
from regime_tagger.ph import diagrams_from_csv
from regime_tagger.pipeline import (
    ConfigError,
    DataError,
    PipelineConfig,
    StageError,
    ingest_csv,
    run_pipeline,
    tag_report,
)
from regime_tagger.sim import DivergenceError, trajectory_from_csv


def write_csv(path, text):
    path.write_text(text)
    return str(path)


class TestIngestCsv:
    def test_three_row_file(self, tmp_path):
        path = write_csv(tmp_path / "a.csv", "age,temp,co2\n1,2.5,3\n2,2.6,4\n3,2.7,5\n")
        ts = ingest_csv(path, "age", ["temp", "co2"])
        assert len(ts) == 3
        assert ts.n_channels == 2
        assert ts.channel_names == ("temp", "co2")
        assert np.array_equal(ts.values[:, 1], [3.0, 4.0, 5.0])

    def test_duplicate_timestamps_listed(self, tmp_path):
        path = write_csv(tmp_path / "a.csv", "age,temp\n1,2\n2,3\n2,4\n")
        with pytest.raises(DataError, match="duplicate timestamps.*2"):
            ingest_csv(path, "age", ["temp"])

    def test_unsorted_rows_are_sorted_stably(self, tmp_path):
        path = write_csv(tmp_path / "a.csv", "age,temp\n3,30\n1,10\n2,20\n")
        ts = ingest_csv(path, "age", ["temp"])
        assert np.array_equal(ts.times, [1.0, 2.0, 3.0])
        assert np.array_equal(ts.values[:, 0], [10.0, 20.0, 30.0])

    def test_missing_cell_reports_row(self, tmp_path):
        path = write_csv(tmp_path / "a.csv", "age,temp\n1,2\n2,\n3,4\n")
        with pytest.raises(DataError, match=":3:"):
            ingest_csv(path, "age", ["temp"])

    def test_non_numeric_reports_row(self, tmp_path):
        path = write_csv(tmp_path / "a.csv", "age,temp\n1,2\n2,oops\n3,4\n")
        with pytest.raises(DataError, match=":3:.*oops"):
            ingest_csv(path, "age", ["temp"])

    def test_interpolate_fills_and_logs(self, tmp_path, caplog):
        path = write_csv(tmp_path / "a.csv", "age,temp\n1,10\n2,\n3,30\n")
        with caplog.at_level(logging.INFO, logger="regime_tagger.pipeline"):
            ts = ingest_csv(path, "age", ["temp"], interpolate=True)
        assert ts.values[1, 0] == pytest.approx(20.0)
        assert any("interpolated" in r.message for r in caplog.records)

    def test_interpolate_rejects_boundary_gap(self, tmp_path):
        path = write_csv(tmp_path / "a.csv", "age,temp\n1,\n2,20\n3,30\n")
        with pytest.raises(DataError, match="boundary"):
            ingest_csv(path, "age", ["temp"], interpolate=True)

    def test_too_few_rows(self, tmp_path):
        path = write_csv(tmp_path / "a.csv", "age,temp\n1,10\n")
        with pytest.raises(DataError, match="at least 2"):
            ingest_csv(path, "age", ["temp"])

    def test_missing_column(self, tmp_path):
        path = write_csv(tmp_path / "a.csv", "age,temp\n1,10\n2,20\n")
        with pytest.raises(DataError, match="missing columns.*co2"):
            ingest_csv(path, "age", ["temp", "co2"])

    def test_infinite_value_rejected(self, tmp_path):
        path = write_csv(tmp_path / "a.csv", "age,temp\n1,inf\n2,20\n")
        with pytest.raises(DataError, match="non-finite"):
            ingest_csv(path, "age", ["temp"])


class TestConfig:
    def test_round_trip_equality(self):
        raw = {
            "sources": [
                {"kind": "lorenz", "rho": 23.5, "x0": [7.95, 7.95, 21.5]},
                {"kind": "csv", "path": "x.csv", "time_column": "age",
                 "value_columns": ["temp", "co2"]},
            ],
            "windowing": {"window_len": 64, "stride": 16},
            "clustering": {"k": 3, "seed": 5},
        }
        cfg = PipelineConfig.from_dict(raw)
        again = PipelineConfig.from_dict(cfg.to_dict())
        assert again == cfg

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="unknown keys"):
            PipelineConfig.from_dict({"source": {"kind": "hopf"}, "bogus": 1})
        with pytest.raises(ConfigError, match="unknown keys"):
            PipelineConfig.from_dict(
                {"source": {"kind": "hopf", "rho": 28.0}}
            )
        with pytest.raises(ConfigError, match="unknown keys"):
            PipelineConfig.from_dict(
                {"source": {"kind": "hopf"}, "windowing": {"win": 10}}
            )

    def test_hopf_windowing_defaults(self):
        cfg = PipelineConfig.from_dict({"source": {"kind": "hopf"}})
        assert cfg.windowing.window_len == 1600
        assert cfg.windowing.sample_stride == 16
        lorenz = PipelineConfig.from_dict({"source": {"kind": "lorenz"}})
        assert lorenz.windowing.window_len == 100
        assert lorenz.windowing.sample_stride == 1

    def test_validation_errors(self):
        with pytest.raises(ConfigError):
            PipelineConfig.from_dict({"source": {"kind": "lorenz", "dt": -1}})
        with pytest.raises(ConfigError):
            PipelineConfig.from_dict(
                {"source": {"kind": "lorenz"}, "clustering": {"k": 0}}
            )
        with pytest.raises(ConfigError):
            PipelineConfig.from_dict({"source": {"kind": "csv", "path": "x"}})
        with pytest.raises(ConfigError):
            PipelineConfig.from_dict({})

    def test_integer_fields_reject_fractions(self):
        with pytest.raises(ConfigError, match="integer"):
            PipelineConfig.from_dict(
                {"source": {"kind": "lorenz"}, "windowing": {"window_len": 50.5}}
            )


def small_vostok_config(tmp_path, out_name="out"):
    data = tmp_path / "rec.csv"
    write_vostok_like_csv(data, seed=2024)
    return PipelineConfig.from_dict(
        {
            "source": {
                "kind": "csv",
                "path": str(data),
                "time_column": "age",
                "value_columns": ["temp", "co2"],
            },
            "windowing": {"window_len": 20, "stride": 10, "mode": "raw"},
            "clustering": {"k": 3, "seed": 42},
            "output": {"out_dir": str(tmp_path / out_name)},
        }
    )


class TestRunPipeline:
    def test_artifacts_and_manifest(self, tmp_path):
        cfg = small_vostok_config(tmp_path)
        manifest = run_pipeline(cfg, workers=1)
        out = tmp_path / "out"
        for name in (
            "series_0.csv",
            "windows.csv",
            "window_meta.csv",
            "diagrams.csv",
            "features.csv",
            "model.json",
            "tagged.csv",
            "plot.svg",
            "manifest.json",
        ):
            assert (out / name).exists(), name
        stage_names = [s["name"] for s in manifest.stages]
        assert stage_names == ["sources", "window", "persist", "featurize", "tag", "plot"]
        assert manifest.source_window_ranges == ((0, 59),)
        # manifest's embedded config re-parses to an equal config
        assert PipelineConfig.from_dict(manifest.config) == cfg
        on_disk = json.loads((out / "manifest.json").read_text())
        assert PipelineConfig.from_dict(on_disk["config"]) == cfg

    def test_byte_identical_reruns(self, tmp_path):
        cfg_a = small_vostok_config(tmp_path, "out_a")
        cfg_b = small_vostok_config(tmp_path, "out_b")
        run_pipeline(cfg_a, workers=1)
        run_pipeline(cfg_b, workers=4)
        for name in (
            "series_0.csv",
            "windows.csv",
            "window_meta.csv",
            "diagrams.csv",
            "features.csv",
            "model.json",
            "tagged.csv",
            "plot.svg",
        ):
            a = (tmp_path / "out_a" / name).read_bytes()
            b = (tmp_path / "out_b" / name).read_bytes()
            assert a == b, f"{name} differs between identical runs"

    def test_plot_svg_contents(self, tmp_path):
        cfg = small_vostok_config(tmp_path)
        run_pipeline(cfg, workers=1)
        svg = (tmp_path / "out" / "plot.svg").read_text()
        assert svg.count("<circle") == 59  # one marker per window
        for label in range(3):
            assert f"label {label}" in svg  # legend entry per cluster
        assert "start_time" in svg

    def test_outputs_reingestible(self, tmp_path):
        cfg = small_vostok_config(tmp_path)
        run_pipeline(cfg, workers=1)
        out = tmp_path / "out"
        series = ingest_csv(out / "series_0.csv", "t", ["temp", "co2"])
        assert len(series) == 600
        clouds = windows_from_csv(out / "windows.csv")
        assert len(clouds) == 59
        diagrams = diagrams_from_csv(out / "diagrams.csv")
        assert len(diagrams) == 59
        vectors = features_from_csv(out / "features.csv")
        assert len(vectors) == 59
        tagged = tagged_from_csv(out / "tagged.csv")
        assert len(tagged) == 59
        traj = trajectory_from_csv(out / "series_0.csv")
        assert len(traj) == 600

    def test_stage_error_removes_partial_outputs(self, tmp_path):
        cfg = PipelineConfig.from_dict(
            {
                "source": {"kind": "lorenz", "rho": 1e9, "t1": 30.0},
                "windowing": {"window_len": 10, "stride": 10},
                "output": {"out_dir": str(tmp_path / "boom")},
            }
        )
        with pytest.raises(StageError) as err:
            run_pipeline(cfg, workers=1)
        assert err.value.stage == "sources"
        assert isinstance(err.value.cause, DivergenceError)
        assert list((tmp_path / "boom").glob("*")) == []

    def test_multi_source_window_ranges(self, tmp_path):
        data = tmp_path / "rec.csv"
        write_vostok_like_csv(data, seed=2024)
        src = {
            "kind": "csv",
            "path": str(data),
            "time_column": "age",
            "value_columns": ["temp", "co2"],
        }
        cfg = PipelineConfig.from_dict(
            {
                "sources": [src, src],
                "windowing": {"window_len": 20, "stride": 10, "mode": "raw"},
                "clustering": {"k": 3, "seed": 42},
                "output": {"out_dir": str(tmp_path / "joint")},
            }
        )
        manifest = run_pipeline(cfg, workers=1)
        assert manifest.source_window_ranges == ((0, 59), (59, 118))
        tagged = tagged_from_csv(tmp_path / "joint" / "tagged.csv")
        assert [t.window_index for t in tagged] == list(range(118))
        # identical sources tag identically
        first = [t.label for t in tagged[:59]]
        second = [t.label for t in tagged[59:]]
        assert first == second


class TestTagReport:
    def test_single_transition(self):
        tagged = [
            TaggedWindow(0, 0.0, (0.0,), 0),
            TaggedWindow(1, 1.0, (0.0,), 0),
            TaggedWindow(2, 2.0, (0.0,), 1),
            TaggedWindow(3, 3.0, (0.0,), 1),
        ]
        report = tag_report(tagged)
        assert report["n_windows"] == 4
        assert report["label_counts"] == {"0": 2, "1": 2}
        assert [(r["label"], r["count"]) for r in report["run_lengths"]] == [(0, 2), (1, 2)]
        assert report["transitions"] == [{"time": 2.0, "from": 0, "to": 1}]

    def test_constant_labels_no_transitions(self):
        tagged = [TaggedWindow(i, float(i), (0.0,), 2) for i in range(5)]
        report = tag_report(tagged)
        assert report["transitions"] == []
        assert report["label_counts"] == {"2": 5}

    def test_reads_csv(self, tmp_path):
        from regime_tagger.cluster import tagged_to_csv

        tagged = [
            TaggedWindow(0, 0.0, (1.0, 0.0), 0),
            TaggedWindow(1, 1.0, (1.0, 0.0), 1),
        ]
        path = tmp_path / "t.csv"
        tagged_to_csv(tagged, path)
        report = tag_report(path)
        assert report["n_windows"] == 2
        assert len(report["transitions"]) == 1

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            tag_report([])


class TestVostokFixture:
    def test_generator_deterministic(self):
        a, la = make_vostok_like(seed=1)
        b, lb = make_vostok_like(seed=1)
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(la, lb)

    def test_shipped_fixture_matches_generator(self):
        import regime_tagger

        shipped = os.path.join(
            os.path.dirname(regime_tagger.__file__), "data", "vostok_like.csv"
        )
        series = ingest_csv(shipped, "age", ["temp", "co2"])
        generated, _ = make_vostok_like(seed=2024)
        assert np.array_equal(series.values, generated.values)
