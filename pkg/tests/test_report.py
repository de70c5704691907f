import numpy as np
import pytest

from gustlab.config import resolve_config
from gustlab.harness import evaluate, robustness_sweep
from gustlab.report import MissingData, read_csv, recompute_rewards, report, verify_trajectory_rewards

from test_harness import proto_doc, zero_residual_checkpoint


@pytest.fixture(scope="module")
def eval_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("evalrun")
    cfg = resolve_config(proto_doc(out))
    evaluate(cfg, None, out_dir=cfg.out_dir, tag="pid_only")
    return cfg


class TestRender:
    def test_one_timeseries_plot_per_axis(self, eval_run, tmp_path):
        artifacts = report(eval_run.out_dir, tmp_path / "rep")
        names = {a.name for a in artifacts}
        assert {"pid_only_error_x.png", "pid_only_error_y.png", "pid_only_error_z.png"} <= names
        assert "summary.txt" in names

    def test_summary_mentions_stats(self, eval_run, tmp_path):
        report(eval_run.out_dir, tmp_path / "rep")
        text = (tmp_path / "rep" / "summary.txt").read_text()
        assert "xy std" in text
        assert "reward recompute" in text

    def test_missing_dir_raises(self, tmp_path):
        with pytest.raises(MissingData):
            report(tmp_path / "nothing_here")

    def test_empty_dir_raises(self, tmp_path):
        (tmp_path / "empty").mkdir()
        with pytest.raises(MissingData):
            report(tmp_path / "empty")

    def test_sweep_plot_dims(self, tmp_path, rng):
        cfg = resolve_config(proto_doc(tmp_path / "run"))
        ck = zero_residual_checkpoint(tmp_path / "z.glab", rng)
        robustness_sweep(
            cfg, ck, (0.75, 1.0, 1.25), (0.75, 1.0, 1.25), mode="grid", out_dir=cfg.out_dir
        )
        artifacts = report(cfg.out_dir, tmp_path / "rep")
        assert any(a.name == "sweep_matrix.png" for a in artifacts)
        rows = read_csv(cfg.out_dir / "sweep_matrix.csv")
        assert len(rows) == 9  # full 3x3 grid


class TestRecompute:
    def test_rewards_match_stored(self, eval_run):
        traj = eval_run.out_dir / "pid_only_trajectory.csv"
        assert verify_trajectory_rewards(traj, eval_run.weights) <= 1e-12

    def test_recompute_detects_tampering(self, eval_run, tmp_path):
        traj = eval_run.out_dir / "pid_only_trajectory.csv"
        lines = traj.read_text().splitlines()
        cols = lines[0].split(",")
        i_reward = cols.index("reward")
        parts = lines[5].split(",")
        parts[i_reward] = "-0.5"
        lines[5] = ",".join(parts)
        bad = tmp_path / "tampered.csv"
        bad.write_text("\n".join(lines) + "\n")
        assert verify_trajectory_rewards(bad, eval_run.weights) > 1e-6

    def test_recompute_row_count(self, eval_run):
        rows = read_csv(eval_run.out_dir / "pid_only_trajectory.csv")
        rec = recompute_rewards(rows, eval_run.weights)
        assert len(rec) == len(rows) - 1
