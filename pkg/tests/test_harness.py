import json
from pathlib import Path

import numpy as np
import pytest

from gustlab.checkpoint import save_checkpoint
from gustlab.config import resolve_config
from gustlab.features import FeatureScales, ResidualBounds
from gustlab.harness import (
    EvalReport,
    evaluate,
    robustness_sweep,
    sweep_cells,
    train,
)
from gustlab.report import verify_trajectory_rewards
from gustlab.sac import SacState


def proto_doc(out_dir, seed=3, **train_over):
    """Config document with a shrunken gust protocol for fast tests."""
    doc = {
        "seed": seed,
        "out_dir": str(out_dir),
        "paper": {"wind": {"eval_gust_steps": 3, "eval_interval_steps": 5}},
    }
    if train_over:
        doc["assumed"] = {"train": dict(train_over)}
    return doc


def micro_train_doc(out_dir, seed=3):
    return {
        "seed": seed,
        "out_dir": str(out_dir),
        "paper": {
            "actor_hidden": [8, 8],
            "critic_hidden": [16, 16],
            "sac": {"batch_size": 32},
            "wind": {"eval_gust_steps": 3, "eval_interval_steps": 5},
        },
        "assumed": {
            "sac": {"warmup_transitions": 64},
            "train": {"total_steps": 300, "eval_interval_steps": 150, "log_every_updates": 1},
        },
    }


def zero_residual_checkpoint(path, rng):
    sac = SacState.create(rng, actor_final_scale=0.0)  # exactly the base controller
    save_checkpoint(path, sac, FeatureScales(), ResidualBounds(), env_steps=0)
    return path


class TestEvaluate:
    def test_pid_only_report_and_trajectory(self, tmp_path):
        cfg = resolve_config(proto_doc(tmp_path / "run"))
        rep = evaluate(cfg, None, out_dir=cfg.out_dir, tag="pid_only")
        assert rep.controller == "pid-only"
        assert rep.steps == 26 * 8
        assert not rep.crashed
        assert len(rep.gust_peaks) == 26
        assert (cfg.out_dir / "pid_only_trajectory.csv").exists()
        assert (cfg.out_dir / "pid_only_report.json").exists()
        loaded = EvalReport.from_json((cfg.out_dir / "pid_only_report.json").read_text())
        assert loaded.xy_std == rep.xy_std

    def test_rewards_recomputable_from_csv(self, tmp_path):
        cfg = resolve_config(proto_doc(tmp_path / "run"))
        evaluate(cfg, None, out_dir=cfg.out_dir, tag="pid_only")
        err = verify_trajectory_rewards(cfg.out_dir / "pid_only_trajectory.csv", cfg.weights)
        assert err <= 1e-12

    def test_deterministic_bytes(self, tmp_path):
        cfg1 = resolve_config(proto_doc(tmp_path / "a"))
        cfg2 = resolve_config(proto_doc(tmp_path / "b"))
        evaluate(cfg1, None, out_dir=cfg1.out_dir, tag="e")
        evaluate(cfg2, None, out_dir=cfg2.out_dir, tag="e")
        assert (cfg1.out_dir / "e_report.json").read_bytes() == (cfg2.out_dir / "e_report.json").read_bytes()
        assert (
            (cfg1.out_dir / "e_trajectory.csv").read_bytes()
            == (cfg2.out_dir / "e_trajectory.csv").read_bytes()
        )

    def test_zero_residual_checkpoint_matches_pid_only(self, tmp_path, rng):
        cfg = resolve_config(proto_doc(tmp_path / "run"))
        ck = zero_residual_checkpoint(tmp_path / "zero.glab", rng)
        base = evaluate(cfg, None, out_dir=None)
        rep = evaluate(cfg, ck, out_dir=None, baseline=base)
        assert rep.xy_std == pytest.approx(base.xy_std, abs=1e-12)
        assert rep.xy_improvement_pct == pytest.approx(0.0, abs=1e-9)
        assert rep.improvement_pct is not None


class TestSweep:
    def test_cells_axis_and_grid(self):
        axis = sweep_cells((0.5, 1.0, 1.5), (0.5, 1.0, 1.5), "axis")
        assert axis == [(0.5, 1.0), (1.0, 1.0), (1.5, 1.0), (1.0, 0.5), (1.0, 1.5)]
        grid = sweep_cells((0.5, 1.0), (0.75, 1.0), "grid")
        assert grid == [(0.5, 0.75), (0.5, 1.0), (1.0, 0.75), (1.0, 1.0)]

    def test_multiplier_range_enforced(self, tmp_path, rng):
        cfg = resolve_config(proto_doc(tmp_path / "run"))
        ck = zero_residual_checkpoint(tmp_path / "z.glab", rng)
        with pytest.raises(ValueError):
            robustness_sweep(cfg, ck, mass_multipliers=(0.1,), mode="axis")

    def test_identity_cell_matches_plain_evaluate(self, tmp_path, rng):
        cfg = resolve_config(proto_doc(tmp_path / "run"))
        ck = zero_residual_checkpoint(tmp_path / "z.glab", rng)
        rep = robustness_sweep(cfg, ck, mass_multipliers=(1.0,), lift_multipliers=(1.0,), mode="axis")
        plain = evaluate(cfg, ck, out_dir=None)
        nominal = [c for c in rep.cells if c["mass_scale"] == 1.0 and c["lift_scale"] == 1.0]
        assert nominal[0]["xy_std"] == plain.xy_std

    def test_worker_count_invariance(self, tmp_path, rng):
        cfg = resolve_config(proto_doc(tmp_path / "run"))
        ck = zero_residual_checkpoint(tmp_path / "z.glab", rng)
        r1 = robustness_sweep(cfg, ck, (0.75, 1.0), (1.25,), mode="axis", workers=1)
        r2 = robustness_sweep(cfg, ck, (0.75, 1.0), (1.25,), mode="axis", workers=2)
        assert r1.to_json() == r2.to_json()

    def test_sweep_artifacts(self, tmp_path, rng):
        cfg = resolve_config(proto_doc(tmp_path / "run"))
        ck = zero_residual_checkpoint(tmp_path / "z.glab", rng)
        rep = robustness_sweep(cfg, ck, (0.5, 1.0), (1.5,), mode="axis", out_dir=cfg.out_dir)
        matrix = (cfg.out_dir / "sweep_matrix.csv").read_text().strip().splitlines()
        assert len(matrix) == 1 + len(rep.cells)
        assert (cfg.out_dir / "sweep_report.json").exists()


class TestTrain:
    def test_micro_train_emits_checkpoints(self, tmp_path):
        cfg = resolve_config(micro_train_doc(tmp_path / "run"))
        result = train(cfg)
        assert result.best_checkpoint.exists()
        assert result.best_step in (150, 300)
        assert (cfg.out_dir / "best.json").exists()
        assert (cfg.out_dir / "training_log.csv").exists()
        ckpts = list((cfg.out_dir / "checkpoints").glob("ckpt_*.glab"))
        assert len(ckpts) == 2
        best = json.loads((cfg.out_dir / "best.json").read_text())
        assert best["xy_std"] == result.best_xy_std

    def test_seeded_training_bit_reproducible(self, tmp_path):
        cfg1 = resolve_config(micro_train_doc(tmp_path / "r1", seed=7))
        cfg2 = resolve_config(micro_train_doc(tmp_path / "r2", seed=7))
        train(cfg1)
        train(cfg2)
        log1 = (cfg1.out_dir / "training_log.csv").read_bytes()
        log2 = (cfg2.out_dir / "training_log.csv").read_bytes()
        assert log1 == log2
        assert (cfg1.out_dir / "evals.csv").read_bytes() == (cfg2.out_dir / "evals.csv").read_bytes()

    def test_different_seed_differs(self, tmp_path):
        cfg1 = resolve_config(micro_train_doc(tmp_path / "r1", seed=7))
        cfg2 = resolve_config(micro_train_doc(tmp_path / "r2", seed=8))
        train(cfg1)
        train(cfg2)
        assert (cfg1.out_dir / "training_log.csv").read_bytes() != (cfg2.out_dir / "training_log.csv").read_bytes()
