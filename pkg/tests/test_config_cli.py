import csv
import json
import socket
from pathlib import Path

import pytest

from abcd.cli import main
from abcd.config import ConfigError, episode_config_to_json, load_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture()
def fig_config(tmp_path):
    src = json.loads((CONFIGS / "bivariate_tanh_noisesd.json").read_text())
    src["episode"]["max_steps"] = 3
    src["design"]["mc_samples"] = 4
    src["design"]["bo_budget"] = 4
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(src))
    return path


class TestConfig:
    def test_checked_in_configs_parse(self):
        for name in (
            "bivariate_tanh_noisevar.json",
            "bivariate_tanh_noisesd.json",
            "chain3_tanh.json",
        ):
            cfg = load_config(CONFIGS / name)
            assert cfg.scm.d in (2, 3)

    def test_round_trip(self):
        cfg = load_config(CONFIGS / "chain3_tanh.json")
        obj = episode_config_to_json(cfg)
        from abcd.config import episode_config_from_json

        cfg2 = episode_config_from_json(obj)
        assert episode_config_to_json(cfg2) == obj

    def test_bad_schema(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"schema": "nope", "scm": {}}))
        with pytest.raises(ConfigError, match="schema"):
            load_config(path)

    def test_missing_mechanism_names_node(self, tmp_path):
        obj = json.loads((CONFIGS / "bivariate_tanh_noisesd.json").read_text())
        obj["scm"]["mechanisms"] = []
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(obj))
        with pytest.raises(ConfigError, match="node 1"):
            load_config(path)

    def test_invalid_json_reports_position(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("{broken")
        with pytest.raises(ConfigError, match="line 1"):
            load_config(path)


class TestSimulate:
    def test_two_runs_byte_identical(self, fig_config, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--config", str(fig_config), "--seed", "7", "--out", str(a)]) == 0
        assert main(["simulate", "--config", str(fig_config), "--seed", "7", "--out", str(b)]) == 0
        assert (a / "trace.jsonl").read_bytes() == (b / "trace.jsonl").read_bytes()
        assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()
        assert (a / "eig_diagnostics.json").read_bytes() == (b / "eig_diagnostics.json").read_bytes()

    def test_run_dir_is_complete(self, fig_config, tmp_path):
        out = tmp_path / "run"
        assert main(["simulate", "--config", str(fig_config), "--seed", "1", "--out", str(out)]) == 0
        for name in ("manifest.json", "trace.jsonl", "summary.csv", "eig_diagnostics.json"):
            assert (out / name).exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["resolved"]["episode"]["seed"] == 1

    def test_rerun_from_manifest_reproduces_trace(self, fig_config, tmp_path):
        a = tmp_path / "a"
        main(["simulate", "--config", str(fig_config), "--seed", "5", "--out", str(a)])
        b = tmp_path / "b"
        assert main(["simulate", "--config", str(a / "manifest.json"), "--out", str(b)]) == 0
        assert (a / "trace.jsonl").read_bytes() == (b / "trace.jsonl").read_bytes()

    def test_bad_config_exit_2(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"schema": "abcd/v1"}))
        assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "x")]) == 2

    def test_existing_nonempty_out_refused(self, fig_config, tmp_path):
        out = tmp_path / "run"
        out.mkdir()
        (out / "junk.txt").write_text("x")
        assert main(["simulate", "--config", str(fig_config), "--out", str(out)]) == 2

    def test_strategy_flags_produce_comparable_summaries(self, fig_config, tmp_path):
        outs = {}
        for strat in ("random", "bo"):
            out = tmp_path / strat
            assert main([
                "simulate", "--config", str(fig_config), "--seed", "9",
                "--out", str(out), "--strategy", strat,
            ]) == 0
            with open(out / "summary.csv", newline="") as fh:
                outs[strat] = list(csv.DictReader(fh))
        assert outs["random"][0].keys() == outs["bo"][0].keys()
        joined = {
            row["t"]: (row["entropy"], outs["bo"][int(row["t"])]["entropy"])
            for row in outs["random"]
            if int(row["t"]) < len(outs["bo"])
        }
        assert joined  # at least one comparable step


class TestEnumerate:
    def test_counts(self, capsys):
        assert main(["enumerate", "--d", "2"]) == 0
        assert capsys.readouterr().out.strip() == "3"
        assert main(["enumerate", "--d", "1"]) == 0
        assert capsys.readouterr().out.strip() == "1"
        assert main(["enumerate", "--d", "4"]) == 0
        assert capsys.readouterr().out.strip() == "543"

    def test_list_emits_json_graphs(self, capsys):
        assert main(["enumerate", "--d", "2", "--list"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "3"
        graphs = [json.loads(line) for line in lines[1:]]
        assert {json.dumps(g["edges"]) for g in graphs} == {"[]", "[[0, 1]]", "[[1, 0]]"}

    def test_out_of_range_exit_2(self, capsys):
        assert main(["enumerate", "--d", "6"]) == 2


class TestServe:
    def test_port_in_use_exit_1(self, tmp_path):
        blocker = socket.socket()
        blocker.bind(("127.0.0.1", 0))
        port = blocker.getsockname()[1]
        try:
            assert main(["serve", "--port", str(port), "--state-dir", str(tmp_path / "s")]) == 1
        finally:
            blocker.close()

    def test_unwritable_state_dir_exit_1(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("not a directory")
        assert main(["serve", "--port", "0", "--state-dir", str(blocker / "nested")]) == 1


class TestReport:
    def test_report_writes_figures(self, fig_config, tmp_path):
        out = tmp_path / "run"
        main(["simulate", "--config", str(fig_config), "--seed", "2", "--out", str(out)])
        assert main(["report", "--run", str(out)]) == 0
        assert (out / "convergence.png").exists()
        assert (out / "posterior.png").exists()
        assert (out / "eig_landscape.png").exists()

    def test_report_on_missing_run_exit_2(self, tmp_path):
        assert main(["report", "--run", str(tmp_path / "nope")]) == 2
