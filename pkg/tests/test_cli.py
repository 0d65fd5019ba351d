"""Configuration parsing, command orchestration, and file emission."""

import csv
import json
import math

import pytest

from cachenet.cli import (
    ANALYTIC_COLUMNS,
    COMPARE_COLUMNS,
    SIM_COLUMNS,
    ConfigError,
    cmd_analyze,
    cmd_compare,
    cmd_simulate,
    emit_results,
    main,
    parse_config,
    spec_to_params,
    spec_to_sim_config,
)

PI = math.pi


class TestParseConfig:
    def test_defaults_are_reference_scenario(self):
        spec = parse_config()
        assert spec.user_intensity == pytest.approx(400.0 / (PI * 500.0**2))
        assert spec.bs_intensity == pytest.approx(4.0 / (PI * 500.0**2))
        assert spec.tx_power_dbm == 43.0
        assert spec.bandwidth_hz == 20e6
        assert spec.path_loss == 4.0
        assert spec.request_rate == 0.025
        assert spec.alpha == 0.25
        assert spec.slot_duration == 0.5
        assert spec.zipf_exponent == 0.8
        assert spec.catalog_size == 200
        assert spec.packet_size_mbits == 10.0
        assert spec.cache_slots == 10
        assert spec.cell_shape_k == 3.575
        assert spec.noise_figure_db is None

    def test_default_params_build(self):
        params = spec_to_params(parse_config())
        assert params.sinr_threshold == pytest.approx(1.0)
        assert params.tx_power == pytest.approx(10.0 ** 1.3, rel=1e-12)
        assert params.noise_power == 0.0

    def test_config_file_and_overrides(self, tmp_path):
        cfg = tmp_path / "exp.json"
        cfg.write_text(json.dumps({"alpha": 0.5, "seed": 9}))
        spec = parse_config(cfg, overrides=["alpha=0.1", "slots=333"], seed=77)
        assert spec.alpha == 0.1  # --set wins over file
        assert spec.slots == 333
        assert spec.seed == 77  # flag wins over file

    def test_baseline_mode(self):
        spec = parse_config(overrides=["alpha=0", "cache_slots=0"])
        assert spec.alpha == 0.0

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config key"):
            parse_config(overrides=["tx_powr_dbm=40"])

    def test_unit_suffix_rejected_explicitly(self):
        with pytest.raises(ConfigError, match="tx_power_dbm"):
            parse_config(overrides=["tx_power=19.95"])
        with pytest.raises(ConfigError, match="bandwidth_hz"):
            parse_config(overrides=["bandwidth_mhz=20"])

    def test_cache_bigger_than_catalog_rejected(self):
        with pytest.raises(ConfigError):
            parse_config(overrides=["cache_slots=300"])

    def test_bad_sweep_values_rejected(self):
        with pytest.raises(ConfigError, match="sweep value"):
            parse_config(overrides=['sweep_values=[0, 5, 900]'])

    def test_bad_sweep_field_rejected(self):
        with pytest.raises(ConfigError, match="not sweepable"):
            parse_config(overrides=["sweep_field=formats"])

    def test_noise_figure_enables_thermal_noise(self):
        spec = parse_config(noise_figure_db=9.0)
        params = spec_to_params(spec)
        expected = 10.0 ** ((-174.0 + 9.0 - 30.0) / 10.0) * 20e6
        assert params.noise_power == pytest.approx(expected, rel=1e-12)

    def test_bad_json_rejected(self, tmp_path):
        cfg = tmp_path / "broken.json"
        cfg.write_text("{not json")
        with pytest.raises(ConfigError, match="not valid JSON"):
            parse_config(cfg)

    def test_sim_config_mapping(self):
        spec = parse_config(overrides=["deployments=4", "edge=guard"])
        sim = spec_to_sim_config(spec)
        assert sim.deployments == 4
        assert sim.edge_mode == "guard"
        assert sim.torus is False


class TestAnalyzeCommand:
    def test_default_sweep_shape_and_ordering(self):
        rows = cmd_analyze(parse_config())
        assert [r["sweep_key"] for r in rows] == [0, 5, 10, 15, 20]
        for row in rows:
            assert set(ANALYTIC_COLUMNS) <= set(row.keys())
            assert row["plr_cache"] <= row["plr_untenable"]
            assert row["t_bar"] == pytest.approx(1.0)

    def test_baseline_rows_mark_cache_column_empty(self):
        rows = cmd_analyze(parse_config(overrides=["alpha=0"]))
        assert all(row["plr_cache"] is None for row in rows)

    def test_alpha_sweep(self):
        spec = parse_config(overrides=['sweep_field=alpha', 'sweep_values=[0, 0.25, 0.5]'])
        rows = cmd_analyze(spec)
        assert rows[0]["plr_cache"] is None
        assert rows[1]["plr_cache"] is not None
        # more caching users -> lighter queues -> more frequently free cells
        assert rows[2]["p_free"] > rows[1]["p_free"] > rows[0]["p_free"]


class TestEmitResults:
    def test_header_only_when_empty(self, tmp_path):
        out = emit_results([], "csv", tmp_path / "empty.csv", ANALYTIC_COLUMNS)
        lines = out.read_text().splitlines()
        assert lines == [",".join(ANALYTIC_COLUMNS)]

    def test_round_trip_full_precision(self, tmp_path):
        rows = cmd_analyze(parse_config())
        out = emit_results(rows, "csv", tmp_path / "a.csv", ANALYTIC_COLUMNS)
        with open(out) as fh:
            parsed = list(csv.DictReader(fh))
        assert len(parsed) == len(rows)
        for orig, back in zip(rows, parsed):
            for col in ANALYTIC_COLUMNS:
                val = orig[col]
                if val is None:
                    assert back[col] == ""
                elif isinstance(val, float):
                    assert float(back[col]) == val  # repr round-trips exactly
                else:
                    assert back[col] == str(val)

    def test_json_mirror(self, tmp_path):
        rows = cmd_analyze(parse_config())
        out = emit_results(rows, "json", tmp_path / "a.json", ANALYTIC_COLUMNS)
        data = json.loads(out.read_text())
        assert data[0]["sweep_key"] == 0
        assert data[2]["plr_untenable"] == rows[2]["plr_untenable"]

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_results([], "xml", tmp_path / "x.xml", ANALYTIC_COLUMNS)


def _fast_sim_overrides(extra=()):
    base = [
        "deployments=2", "slots=60", "warmup=25", "area_side=2000",
        'sweep_values=[0, 10]',
    ]
    return base + list(extra)


class TestSimulateAndCompare:
    def test_simulate_rows_have_metadata(self):
        spec = parse_config(overrides=_fast_sim_overrides(), seed=5)
        rows = cmd_simulate(spec)
        assert [r["sweep_key"] for r in rows] == [0, 10]
        for row in rows:
            assert set(SIM_COLUMNS) <= set(row.keys())
            assert row["seed"] == 5
            assert row["deployments"] == 2
            assert row["slots"] == 60
        # M = 0 still has cache-equipped receivers; they just cancel nothing
        assert rows[0]["plr_cache"] is not None
        assert rows[0]["plr_untenable"] is not None

    def test_compare_reports_deviations(self):
        spec = parse_config(overrides=_fast_sim_overrides(), seed=5)
        rows, deviations = cmd_compare(spec)
        assert len(rows) == 2
        for col in ("p_full", "p_free", "p_modest", "plr_untenable"):
            assert math.isfinite(deviations[col])
            assert deviations[col] >= 0.0
        for row in rows:
            assert set(COMPARE_COLUMNS) <= set(row.keys())

    def test_compare_leaves_analytic_untouched(self):
        spec = parse_config(overrides=_fast_sim_overrides(), seed=5)
        standalone = cmd_analyze(spec)
        rows, _ = cmd_compare(spec)
        for srow, crow in zip(standalone, rows):
            assert crow["analytic_p_full"] == srow["p_full"]
            assert crow["analytic_plr_untenable"] == srow["plr_untenable"]


class TestMainEntry:
    def test_analyze_writes_files(self, tmp_path, capsys):
        code = main(["analyze", "--out", str(tmp_path), "--format", "csv"])
        assert code == 0
        out = tmp_path / "analytic_cache_slots.csv"
        assert out.exists()
        assert "wrote" in capsys.readouterr().out

    def test_validation_error_exit_code(self, tmp_path, capsys):
        code = main(["analyze", "--set", "cache_slots=999", "--out", str(tmp_path)])
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_simulate_deterministic_bytes(self, tmp_path):
        argv = [
            "simulate", "--seed", "11", "--format", "csv",
            "--set", "deployments=2", "--set", "slots=50", "--set", "warmup=20",
            "--set", "area_side=1500", "--set", "sweep_values=[10]",
        ]
        code1 = main(argv + ["--out", str(tmp_path / "run1")])
        code2 = main(argv + ["--out", str(tmp_path / "run2")])
        assert code1 == code2 == 0
        b1 = (tmp_path / "run1" / "simulated_cache_slots.csv").read_bytes()
        b2 = (tmp_path / "run2" / "simulated_cache_slots.csv").read_bytes()
        assert b1 == b2

    def test_no_cancellation_flag(self, tmp_path):
        code = main([
            "simulate", "--no-cancellation", "--out", str(tmp_path),
            "--set", "deployments=1", "--set", "slots=40", "--set", "warmup=10",
            "--set", "area_side=1500", "--set", "sweep_values=[10]",
        ])
        assert code == 0

    def test_sweep_emits_all_three_artifacts(self, tmp_path):
        code = main([
            "sweep", "--seed", "2", "--out", str(tmp_path),
            "--set", "deployments=1", "--set", "slots=40", "--set", "warmup=10",
            "--set", "area_side=1500", "--set", "sweep_values=[0, 10]",
        ])
        assert code == 0
        for stem in ("analytic", "simulated", "compare"):
            assert (tmp_path / f"{stem}_cache_slots.csv").exists()
