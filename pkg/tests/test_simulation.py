import csv
import json
import math

import numpy as np
import pytest

from evdep.errors import ParameterError
from evdep.estimators import adaptive_weighted, cfg_rank
from evdep.models import PickandsModel
from evdep.simulation import (
    COVERAGE,
    COVERAGE_COLUMNS,
    MSE_COLUMNS,
    MSE_RATIO,
    ConfigError,
    ExperimentConfig,
    ExperimentReport,
    emit_report,
    load_bundled_config,
    read_report_json,
    resolve_threads,
    run_coverage_experiment,
    run_experiment,
    run_mse_experiment,
)


def small_mse(**kw):
    d = {
        "mode": "mse_ratio",
        "families": [{"family": "gumbel", "theta": 2.0}, {"family": "tawn", "theta": 0.25}],
        "sizes": [50],
        "t_grid": [0.3, 0.5],
        "replicates": 12,
        "seed": 7,
    }
    d.update(kw)
    return ExperimentConfig.from_dict(d)


def small_cov(**kw):
    d = {
        "mode": "coverage",
        "cells": [{"family": "gumbel", "theta": 2.0, "n": 60, "t": 0.5}, {"family": "hr", "theta": 0.5, "n": 60, "t": 0.3}],
        "replicates": 8,
        "seed": 3,
        "jel": {"quad_order": 60},
    }
    d.update(kw)
    return ExperimentConfig.from_dict(d)


class TestConfig:
    def test_bundled_table(self):
        cfg = load_bundled_config("table1")
        assert cfg.mode == COVERAGE and cfg.replicates == 1000
        cells = cfg.expand_cells()
        assert len(cells) == 12
        assert (PickandsModel("gumbel", 2.0), 100, 0.5) in cells
        assert cfg.jel.a_n == 0.1 and cfg.jel.h is None and cfg.jel.kernel.name == "biweight"

    def test_bundled_figure(self):
        cfg = load_bundled_config("figure1")
        assert cfg.mode == MSE_RATIO
        assert len(cfg.expand_cells()) == 3 * 2 * 9
        assert len(cfg.expand_cells(include_optional=True)) == 3 * 3 * 9

    def test_hash_stable(self):
        assert small_mse().config_hash() == small_mse().config_hash()
        assert small_mse().config_hash() != small_mse(seed=8).config_hash()

    def test_roundtrip(self):
        cfg = small_cov()
        again = ExperimentConfig.from_dict(cfg.to_dict())
        assert again.to_dict() == cfg.to_dict()

    @pytest.mark.parametrize(
        "patch, path",
        [
            ({"replicates": 0}, "replicates"),
            ({"mode": "plots"}, "mode"),
            ({"t_grid": [0.5, 1.5]}, "t_grid/1"),
            ({"families": [{"family": "gumbel"}]}, "families/0"),
            ({"jel": {"a_n": 0.7}}, "jel/a_n"),
            ({"bogus": 1}, "<root>"),
        ],
    )
    def test_schema_errors_name_path(self, patch, path):
        with pytest.raises(ConfigError) as exc:
            small_mse(**patch)
        assert exc.value.path == path

    def test_bad_family_parameter(self):
        with pytest.raises(ConfigError):
            small_mse(families=[{"family": "gumbel", "theta": 0.5}])

    def test_coverage_rejects_endpoint_t(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(
                {"mode": "coverage", "families": [{"family": "gumbel", "theta": 2}], "sizes": [50], "t_grid": [0.0]}
            )

    def test_bad_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{nope")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json(p)


class TestMse:
    def test_columns_and_rows(self):
        rep = run_mse_experiment(small_mse(), threads=1)
        assert rep.columns == MSE_COLUMNS
        assert len(rep.rows) == 4
        for row in rep.rows:
            assert row["ratio"] == pytest.approx(row["mse_adaptive"] / row["mse_cfg"])
            assert row["failures"] == 0

    def test_deterministic(self):
        a = run_mse_experiment(small_mse(), threads=1)
        b = run_mse_experiment(small_mse(), threads=1)
        assert a.rows == b.rows
        assert a.content_hash() == b.content_hash()

    def test_seed_changes_result(self):
        a = run_mse_experiment(small_mse(), threads=1)
        b = run_mse_experiment(small_mse(seed=99), threads=1)
        assert a.rows != b.rows

    def test_threads_do_not_change_result(self):
        a = run_mse_experiment(small_mse(), threads=1)
        b = run_mse_experiment(small_mse(), threads=2)
        assert a.rows == b.rows

    def test_cell_order_irrelevant(self):
        cfg = small_mse()
        rev = small_mse(
            families=[{"family": "tawn", "theta": 0.25}, {"family": "gumbel", "theta": 2.0}], t_grid=[0.5, 0.3]
        )
        a, b = run_mse_experiment(cfg, threads=1), run_mse_experiment(rev, threads=1)
        key = lambda r: (r["family"], r["t"])
        assert sorted(a.rows, key=key) == sorted(b.rows, key=key)

    def test_replicate_matches_direct_computation(self):
        from evdep.empirical import pseudo_observations
        from evdep.numerics import RngStream

        cfg = small_mse(families=[{"family": "gumbel", "theta": 2.0}], t_grid=[0.5])
        m = PickandsModel("gumbel", 2.0)
        truth = m.A(0.5)
        a, c = [], []
        for r in range(cfg.replicates):
            ps = pseudo_observations(m.sample(50, RngStream(7, r)))
            a.append((adaptive_weighted(ps, 0.5) - truth) ** 2)
            c.append((cfg_rank(ps, 0.5) - truth) ** 2)
        row = run_mse_experiment(cfg, threads=1).rows[0]
        assert row["mse_adaptive"] == pytest.approx(math.fsum(a) / len(a), rel=1e-14)
        assert row["mse_cfg"] == pytest.approx(math.fsum(c) / len(c), rel=1e-14)

    def test_exact_reference_gives_nan_ratio(self):
        cfg = small_mse(families=[{"family": "gumbel", "theta": 2.0}])
        truth = PickandsModel("gumbel", 2.0)
        est = {"adaptive": adaptive_weighted, "cfg": lambda ps, t: float(truth.A(t))}
        for row in run_mse_experiment(cfg, threads=1, estimators=est).rows:
            assert row["mse_cfg"] == 0.0
            assert math.isnan(row["ratio"])

    def test_failed_replicates_counted(self):
        cfg = small_mse(families=[{"family": "gumbel", "theta": 2.0}], t_grid=[0.5])

        def flaky(ps, t):
            if ps.ranks[0, 0] % 2:
                raise ParameterError("boom")
            return 0.7

        row = run_mse_experiment(cfg, threads=1, estimators={"adaptive": flaky, "cfg": cfg_rank}).rows[0]
        assert 0 < row["failures"] < cfg.replicates

    def test_wrong_mode(self):
        with pytest.raises(ConfigError):
            run_mse_experiment(small_cov())


class TestCoverage:
    def test_rows(self):
        rep = run_coverage_experiment(small_cov(), threads=1)
        assert rep.columns == COVERAGE_COLUMNS
        assert len(rep.rows) == 4
        for row in rep.rows:
            assert 0 <= row["coverage"] <= 1
            assert row["mean_width"] > 0
        w90 = rep.find(family="Gumbel", t=0.5, level=0.9)[0]["mean_width"]
        w95 = rep.find(family="Gumbel", t=0.5, level=0.95)[0]["mean_width"]
        assert w95 > w90

    def test_deterministic(self):
        assert run_experiment(small_cov(), threads=1).content_hash() == run_experiment(small_cov(), threads=1).content_hash()


class TestReports:
    def make(self):
        row = {"family": "Gumbel", "theta": 2.0, "n": 100, "t": 0.5, "level": 0.9, "coverage": 0.8705,
               "mean_width": 0.1234567, "failures": 0, "half_open": 0}
        return ExperimentReport(COVERAGE, [row], {"seed": 1, "wall_time": 1.5})

    def test_csv_format(self, tmp_path):
        p = tmp_path / "r.csv"
        emit_report(self.make(), "csv", p)
        lines = p.read_text().splitlines()
        assert lines[0] == ",".join(COVERAGE_COLUMNS)
        assert lines[1] == "Gumbel,2.000000,100,0.500000,0.900000,0.870500,0.123457,0"

    def test_json_roundtrip(self, tmp_path):
        p = tmp_path / "r.json"
        rep = self.make()
        emit_report(rep, "json", p)
        back = read_report_json(p)
        assert back.rows == rep.rows and back.content_hash() == rep.content_hash()

    def test_hash_ignores_wall_time(self):
        a, b = self.make(), self.make()
        b.metadata["wall_time"] = 99.0
        assert a.content_hash() == b.content_hash()

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ParameterError):
            emit_report(self.make(), "xml", tmp_path / "x")

    def test_metadata(self):
        rep = run_mse_experiment(small_mse(), threads=1)
        md = rep.metadata
        assert md["seed"] == 7 and md["replicates"] == 12
        assert md["config_hash"] == small_mse().config_hash()


def test_resolve_threads(monkeypatch):
    monkeypatch.setenv("EVDEP_THREADS", "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(2) == 2
    assert resolve_threads(0) >= 1
