import math

import pytest
import yaml

from marqoe.experiment import load_config
from marqoe.synthetic import mixed_mobility_scenario

GOLDEN_CONFIG = {
    "seed": 1,
    "epoch_len": 1.0,
    "method": "agent",
    "alloc": {"target_qoe": 0.6, "high_qoe": 0.95, "total_bandwidth": 5.0e7},
    "predictor": {"lookahead": 0.3, "history_window": 0.3},
    "channel": {"mean_snr": 1.0},
    "queue": {"frame_bits": 1.0e6, "max_delay": 0.1},
    "frustum": {"vertical_fov": math.radians(60.0)},
    "user_overrides": {"P02": {"mean_snr": 9.0}, "P03": {"mean_snr": 9.0}},
}


@pytest.fixture(scope="session")
def golden_paths(tmp_path_factory):
    """Bundled five-user scenario plus its experiment config file."""
    root = tmp_path_factory.mktemp("golden")
    manifest = mixed_mobility_scenario(str(root / "scenario"))
    doc = dict(GOLDEN_CONFIG)
    doc["manifest"] = manifest
    config_path = root / "golden_config.yaml"
    config_path.write_text(yaml.safe_dump(doc, sort_keys=True))
    return {"manifest": manifest, "config": str(config_path), "root": root}


@pytest.fixture
def golden_config(golden_paths, tmp_path):
    return load_config(golden_paths["config"], out_dir=str(tmp_path / "out"))


@pytest.fixture(scope="session")
def golden_report(golden_paths, tmp_path_factory):
    """One shared run of the golden experiment for read-only assertions."""
    from marqoe.experiment import run_experiment

    out = tmp_path_factory.mktemp("golden_out")
    cfg = load_config(golden_paths["config"], out_dir=str(out))
    return cfg, run_experiment(cfg)
