import json

import pytest

from batchbo.cli import main

RUN_ARGS = ["--batch-size", "2", "--epochs", "2", "--n-init", "4",
            "--slice-samples", "50", "--repeats", "2", "--seed", "123",
            "--gp-restarts", "2", "--encounter-tol", "0.05", "--no-plots"]


class TestRun:
    def test_writes_outputs(self, tmp_path, capsys):
        rc = main(["run", "--objective", "branin", "--strategy", "kmbbo",
                   "--out", str(tmp_path / "r")] + RUN_ARGS)
        assert rc == 0
        for name in ("result.json", "final_table.csv", "regret_quantiles.csv",
                     "first_encounter.csv"):
            assert (tmp_path / "r" / name).exists()
        out = capsys.readouterr().out
        assert "kmbbo on branin" in out

    def test_config_file_supplies_flags(self, tmp_path):
        cfg = {
            "objective": "branin", "strategy": "qei", "out": str(tmp_path / "r"),
            "batch_size": 2, "epochs": 1, "n_init": 4, "slice_samples": 50,
            "repeats": 1, "seed": 5, "gp_restarts": 2, "encounter_tol": 0.05,
            "plots": False,
        }
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        assert main(["run", "--config", str(path)]) == 0
        doc = json.loads((tmp_path / "r" / "result.json").read_text())
        assert doc["config"]["strategy"] == "qei"
        assert doc["config"]["n_epochs"] == 1

    def test_explicit_flag_overrides_config(self, tmp_path):
        cfg = {"objective": "branin", "strategy": "qei", "out": str(tmp_path / "r"),
               "batch_size": 2, "epochs": 1, "n_init": 4, "repeats": 1, "seed": 5,
               "gp_restarts": 2, "encounter_tol": 0.05, "plots": False}
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        assert main(["run", "--config", str(path), "--seed", "9"]) == 0
        doc = json.loads((tmp_path / "r" / "result.json").read_text())
        assert doc["config"]["base_seed"] == 9

    def test_missing_required(self, capsys):
        assert main(["run", "--objective", "branin"]) == 2
        assert "required" in capsys.readouterr().err


class TestOracle:
    def test_branin_verifies(self, capsys):
        assert main(["oracle", "--objective", "branin", "--samples", "20000"]) == 0
        out = capsys.readouterr().out
        assert "known optimum" in out and "ok:" in out

    def test_sparse_pool(self, capsys):
        rc = main(["oracle", "--objective", "sparse-pool", "--pool-size", "500",
                   "--pool-dim", "20", "--pool-sparsity", "3", "--seed", "1"])
        assert rc == 0


class TestRank:
    def test_two_strategy_table(self, tmp_path, capsys):
        for strategy in ("kmbbo", "qei"):
            rc = main(["run", "--objective", "branin", "--strategy", strategy,
                       "--out", str(tmp_path / strategy)] + RUN_ARGS)
            assert rc == 0
        rc = main(["rank", "--inputs", str(tmp_path / "kmbbo"), str(tmp_path / "qei"),
                   "--out", str(tmp_path / "z.csv")])
        assert rc == 0
        text = (tmp_path / "z.csv").read_text().strip().splitlines()
        assert text[0] == "strategy,z_performance,z_variance"
        assert len(text) == 3
        values = {row.split(",")[0]: float(row.split(",")[1]) for row in text[1:]}
        assert set(values.values()) == {0.0, 1.0}

    def test_rank_needs_inputs(self, tmp_path, capsys):
        assert main(["rank", "--inputs", str(tmp_path / "nope")]) == 2
