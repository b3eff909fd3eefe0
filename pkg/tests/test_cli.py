import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from hetgl.cli import main


def write_config(path, **overrides):
    config = {
        "dataset": {
            "synthetic": {
                "backbone": {"model": "watts_strogatz", "n": 16, "k": 2,
                             "rewire": 0.1},
                "schema": {"node_types": {"A": 1, "B": 1},
                           "relations": {"intra": ["A", "A"],
                                         "cross": ["A", "B"]}},
                "n_dims": 16,
                "active_dims": 8,
                "sdor_targets": {"0,1": 0.0},
                "dgp": {"sigma": 2.0, "nu": 0.002},
            }
        },
        "trials": 1,
        "base_seed": 0,
        "methods": ["ir", "homogeneous"],
        "metrics": ["auc", "gmse", "nrmse"],
    }
    config.update(overrides)
    path.write_text(json.dumps(config))
    return path


@pytest.fixture
def runner():
    return CliRunner()


class TestSynth:
    def test_writes_dataset(self, tmp_path, runner):
        cfg = write_config(tmp_path / "config.json")
        out = tmp_path / "data"
        result = runner.invoke(main, ["synth", "--config", str(cfg),
                                      "--out", str(out), "--seed", "4"])
        assert result.exit_code == 0, result.output
        for name in ("schema.json", "nodes.csv", "edges.csv", "features.csv",
                     "embeddings.csv", "resolved_config.json"):
            assert (out / name).exists()

    def test_bad_config_exits_one(self, tmp_path, runner):
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps({"dataset": {}}))
        result = runner.invoke(main, ["synth", "--config", str(cfg),
                                      "--out", str(tmp_path / "x")])
        assert result.exit_code == 1

    def test_invalid_json_exits_one(self, tmp_path, runner):
        cfg = tmp_path / "config.json"
        cfg.write_text("{not json")
        result = runner.invoke(main, ["synth", "--config", str(cfg),
                                      "--out", str(tmp_path / "x")])
        assert result.exit_code == 1


class TestEval:
    def test_synthetic_eval_reports_metrics(self, tmp_path, runner):
        cfg = write_config(tmp_path / "config.json")
        result = runner.invoke(main, ["eval", "--config", str(cfg),
                                      "--out", str(tmp_path / "res")])
        assert result.exit_code == 0, result.output
        assert "auc" in result.output
        assert (tmp_path / "res" / "results.csv").exists()

    def test_fit_on_files(self, tmp_path, runner):
        cfg = write_config(tmp_path / "config.json")
        out = tmp_path / "data"
        runner.invoke(main, ["synth", "--config", str(cfg), "--out", str(out)])
        fit_cfg = tmp_path / "fit.json"
        fit_cfg.write_text(json.dumps({"dataset": {"files": str(out)},
                                       "trials": 1, "methods": ["ir"]}))
        result = runner.invoke(main, ["fit", "--config", str(fit_cfg),
                                      "--out", str(tmp_path / "fitted")])
        assert result.exit_code == 0, result.output
        trial_dirs = list((tmp_path / "fitted").glob("trial_*"))
        assert trial_dirs and (trial_dirs[0] / "learned_edges.csv").exists()

    def test_all_trials_diverged_exits_two(self, tmp_path, runner, monkeypatch):
        from hetgl import experiments as ex
        from hetgl.types import DivergenceError

        def broken(*args, **kwargs):
            raise DivergenceError("boom")

        monkeypatch.setattr(ex, "fit", broken)
        monkeypatch.setattr(ex, "fit_homogeneous", broken)
        cfg = write_config(tmp_path / "config.json")
        result = runner.invoke(main, ["eval", "--config", str(cfg)])
        assert result.exit_code == 2

    def test_missing_config_exits_one(self, runner):
        result = runner.invoke(main, ["eval"])
        assert result.exit_code == 1

    def test_missing_features_exits_one(self, tmp_path, runner):
        cfg = write_config(tmp_path / "config.json")
        out = tmp_path / "data"
        runner.invoke(main, ["synth", "--config", str(cfg), "--out", str(out)])
        (out / "features.csv").unlink()
        fit_cfg = tmp_path / "fit.json"
        fit_cfg.write_text(json.dumps({"dataset": {"files": str(out)},
                                       "trials": 1}))
        result = runner.invoke(main, ["fit", "--config", str(fit_cfg)])
        assert result.exit_code == 1


class TestSweep:
    def test_small_grid(self, tmp_path, runner):
        cfg = write_config(tmp_path / "config.json",
                           sweep={"grid": [0.0, 1.0]})
        result = runner.invoke(main, ["sweep-sdor", "--config", str(cfg),
                                      "--out", str(tmp_path / "sweep")])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "sweep" / "sweep_sdor.csv").exists()
        assert "target=0.00" in result.output and "target=1.00" in result.output


class TestStudy:
    def test_study_runs_on_labeled_files(self, tmp_path, runner):
        # build a small labeled corpus on disk, then study it
        from hetgl import experiments as ex
        from hetgl import io as hio
        corpus = ex.graded_homophily_corpus((0.5, 0.95), nodes_per_level=24,
                                            n_dims=30, seed=0)
        data_dir = tmp_path / "corpus"
        hio.save_dataset(data_dir, corpus.graph, corpus.signals)
        cfg = tmp_path / "study.json"
        cfg.write_text(json.dumps({
            "dataset": {"files": str(data_dir)},
            "study": {"meta_path": {"node_types": ["A", "A"],
                                    "relations": ["link"]},
                      "n_subgraphs": 4, "size": 24},
        }))
        result = runner.invoke(main, ["study-rhr", "--config", str(cfg),
                                      "--out", str(tmp_path / "study_out")])
        assert result.exit_code == 0, result.output
        assert "pearson_r=" in result.output
        assert (tmp_path / "study_out" / "study_rhr.csv").exists()
