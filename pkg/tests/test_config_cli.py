import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from gustlab.cli import main
from gustlab.config import ConfigError, default_config, load_config, resolve_config, write_config


class TestConfig:
    def test_defaults_resolve(self):
        cfg = resolve_config({"seed": 5})
        assert cfg.seed == 5
        assert cfg.sac.gamma == 0.95
        assert cfg.sac.tau == 1.0e-4
        assert cfg.sac.batch_size == 128
        assert cfg.sac.learning_rate == 2.0e-4
        assert cfg.reference.mass == 3.53
        assert cfg.actor_hidden == (30, 20, 5)
        assert cfg.critic_hidden == (400, 200, 100)
        np.testing.assert_array_equal(cfg.bounds.a_max, [0.25, 0.1, 0.1, 0.1])
        assert cfg.schedule.speed_lo == 15.0 and cfg.schedule.speed_hi == 25.0
        assert cfg.episode.rl_period_s == 0.1

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown configuration key"):
            resolve_config({"seed": 1, "paper": {"learning_rat": 1e-3}})

    def test_bad_schema_version(self):
        with pytest.raises(ConfigError):
            resolve_config({"seed": 1, "schema_version": 99})

    def test_seed_required(self):
        with pytest.raises(ConfigError):
            resolve_config({"seed": None})

    def test_file_round_trip(self, tmp_path):
        p = tmp_path / "cfg.yaml"
        write_config(p)
        cfg = load_config(p)
        assert cfg.sac.gamma == 0.95

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.yaml")

    def test_override_merges_nested(self, tmp_path):
        p = tmp_path / "cfg.yaml"
        p.write_text(yaml.safe_dump({"seed": 2, "paper": {"sac": {"gamma": 0.9}}}))
        cfg = load_config(p)
        assert cfg.sac.gamma == 0.9
        assert cfg.sac.batch_size == 128  # untouched default

    def test_out_root_env_var(self, tmp_path, monkeypatch):
        monkeypatch.setenv("GUSTLAB_OUT", str(tmp_path / "root"))
        cfg = resolve_config({"seed": 1, "out_dir": "runs/x"})
        assert cfg.out_dir == tmp_path / "root" / "runs" / "x"

    def test_sweep_scaling(self):
        cfg = resolve_config({"seed": 1, "assumed": {"vehicle": {"mass_scale": 1.5}}})
        assert cfg.vehicle.mass == pytest.approx(1.5 * 3.53)
        assert cfg.reference.mass == pytest.approx(3.53)

    def test_shipped_configs_parse(self):
        root = Path(__file__).resolve().parents[1] / "configs"
        for name in ("smoke.yaml", "desk.yaml", "full.yaml"):
            cfg = load_config(root / name)
            assert cfg.total_steps > 0


class TestCliExitCodes:
    def test_config_error_is_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("seed: 1\nnot_a_key: 3\n")
        rc = main(["eval", "--config", str(bad), "--pid-only"])
        assert rc == 2

    def test_missing_config_is_2(self, tmp_path):
        rc = main(["train", "--config", str(tmp_path / "none.yaml")])
        assert rc == 2

    def test_corrupt_checkpoint_is_2(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("seed: 1\n")
        ck = tmp_path / "bad.glab"
        ck.write_bytes(b"not a checkpoint")
        rc = main(["eval", "--config", str(cfg), "--checkpoint", str(ck), "--out", str(tmp_path)])
        assert rc == 2

    def test_report_missing_dir_is_2(self, tmp_path):
        rc = main(["report", str(tmp_path / "missing")])
        assert rc == 2
