import math
import os
from dataclasses import replace

import pytest

from marqoe.allocate import AllocationParams
from marqoe.errors import ConfigError, InvalidInput
from marqoe.experiment import (ExperimentConfig, config_from_dict, emit_report,
                               load_config, read_report_csv, run_experiment,
                               write_report_csv)
from marqoe.network import ChannelConfig, QueueParams
from marqoe.predict import PredictorConfig
from marqoe.synthetic import write_scenario
from marqoe.ucr import UserContextStore


def single_user_config(tmp_path, profile="stationary", **user_kw):
    users = [{"user_id": "U1", "profile": profile, "duration": 6.0,
              "position": (0, 0, -0.5), **user_kw}]
    manifest = write_scenario(str(tmp_path / "scen"), users,
                              [-3.0, -1.5, 1.0, 3.0, 1.5, 3.0])
    return ExperimentConfig(
        manifest=manifest, out_dir=str(tmp_path / "out"), seed=1,
        alloc=AllocationParams(target_qoe=0.6, high_qoe=0.95,
                               total_bandwidth=2e7),
        predictor=PredictorConfig(lookahead=0.3, history_window=0.3),
        channel=ChannelConfig(mean_snr=3.0),
        queue=QueueParams(1e6, 0.1),
    )


class TestRunExperiment:
    def test_single_stationary_user_constant_allocation(self, tmp_path):
        cfg = single_user_config(tmp_path)
        report = run_experiment(cfg)
        bandwidths = {r.bandwidth_hz for r in report.records}
        assert len(bandwidths) == 1  # donor with no lower tier change
        assert all(r.realized_after == 1.0 for r in report.records)

    def test_zero_bandwidth_simulation_scores_zero(self, tmp_path):
        cfg = single_user_config(tmp_path)
        cfg = replace(cfg, reallocation=False,
                      initial_allocation={"U1": 0.0})
        report = run_experiment(cfg)
        assert all(r.realized_after == 0.0 for r in report.records)
        assert all(r.predicted_qoe == 0.0 for r in report.records)

    def test_record_count_is_epochs_times_users(self, golden_report):
        _, report = golden_report
        epochs = report.summary["epochs"]
        assert len(report.records) == epochs * 5
        assert report.summary["users"] == 5

    def test_budget_respected_every_epoch(self, golden_report):
        cfg, report = golden_report
        total = cfg.alloc.total_bandwidth
        by_epoch = {}
        for r in report.records:
            by_epoch.setdefault(r.epoch, 0.0)
            by_epoch[r.epoch] += r.bandwidth_hz
        for epoch, used in by_epoch.items():
            assert used <= total * (1 + 1e-9)

    def test_infeasible_initial_allocation_rejected(self, tmp_path):
        cfg = single_user_config(tmp_path)
        cfg = replace(cfg, initial_allocation={"U1": 1e9})
        with pytest.raises(ConfigError):
            run_experiment(cfg)

    def test_history_lands_in_ucr(self, tmp_path):
        cfg = single_user_config(tmp_path)
        run_experiment(cfg)
        store = UserContextStore(os.path.join(cfg.out_dir, "ucr"))
        record = store.get("U1")
        assert len(record.history) >= 2
        epochs = [h.epoch for h in record.history]
        assert epochs == sorted(epochs)

    def test_deterministic_reports_byte_identical(self, golden_config, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        for out in (out_a, out_b):
            cfg = replace(golden_config, out_dir=str(out))
            report = run_experiment(cfg)
            emit_report(report, str(out))
        for name in ("report.csv", "report.svg", "report_summary.yaml"):
            a = (out_a / name).read_bytes()
            b = (out_b / name).read_bytes()
            assert a == b, name


class TestReportIO:
    def test_csv_round_trip(self, golden_report, tmp_path):
        _, report = golden_report
        path = tmp_path / "report.csv"
        write_report_csv(report, str(path))
        back = read_report_csv(str(path))
        assert back == report.records

    def test_csv_rejects_other_files(self, tmp_path):
        path = tmp_path / "nope.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(InvalidInput):
            read_report_csv(str(path))

    def test_svg_has_two_bars_per_user(self, golden_report, tmp_path):
        _, report = golden_report
        files = emit_report(report, str(tmp_path / "r"))
        svg = [f for f in files if f.endswith(".svg")][0]
        content = open(svg).read()
        assert content.count("<rect") == 10  # 5 users x before/after

    def test_unknown_format_rejected(self, golden_report, tmp_path):
        _, report = golden_report
        with pytest.raises(InvalidInput):
            emit_report(report, str(tmp_path), formats=("pdf",))


class TestConfigLoading:
    def test_nested_sections(self):
        cfg = config_from_dict({
            "manifest": "m.yaml",
            "alloc": {"target_qoe": 0.5, "high_qoe": 0.9,
                      "total_bandwidth": 1e7},
            "predictor": {"lookahead": 0.2,
                          "kalman": {"process_noise": 1e-3}},
            "channel": {"mode": "lognormal", "shadowing_sigma_db": 3.0},
            "queue": {"frame_bits": 2e6, "max_delay": 0.05},
        })
        assert cfg.alloc.target_qoe == 0.5
        assert cfg.predictor.kalman.process_noise == 1e-3
        assert cfg.channel.mode == "lognormal"
        assert cfg.queue.frame_bits == 2e6

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"manifest": "m", "bogus": 1})

    def test_flag_overrides_beat_file(self, golden_paths):
        cfg = load_config(golden_paths["config"], total_bandwidth=9e7,
                          seed=42)
        assert cfg.alloc.total_bandwidth == 9e7
        assert cfg.seed == 42
        assert cfg.alloc.target_qoe == 0.6  # from file
