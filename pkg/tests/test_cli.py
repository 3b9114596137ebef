import json
from pathlib import Path

import pytest

from redbranch.errors import ConfigError
from redbranch.experiments_cli import (
    CSV_COLUMNS,
    ReportRow,
    main,
    parse_config,
    shipped_configs,
)

CONFIG_DIR = Path(__file__).resolve().parents[1] / "src" / "redbranch" / "configs"


def _write(tmp_path: Path, body: str) -> Path:
    p = tmp_path / "exp.cfg"
    p.write_text(body)
    return p


GOOD = """
[experiment]
kind = qtable
name = tiny
seed = 7

[params]
alpha1 = 1.0
alpha2 = 1.0
a21 = 0.3

[grid]
n = 1024, 2048, 4096
"""


class TestParseConfig:
    def test_good_config(self, tmp_path):
        cfg = parse_config(_write(tmp_path, GOOD))
        assert cfg.kind == "qtable"
        assert cfg.seed == 7
        assert cfg.param_sets == [(1.0, 1.0, 0.3)]
        assert cfg.n_values == [1024, 2048, 4096]

    def test_missing_seed(self, tmp_path):
        bad = GOOD.replace("seed = 7", "")
        with pytest.raises(ConfigError, match="seed"):
            parse_config(_write(tmp_path, bad))

    def test_bad_kind(self, tmp_path):
        with pytest.raises(ConfigError, match="kind"):
            parse_config(_write(tmp_path, GOOD.replace("qtable", "nonsense")))

    def test_empty_grid(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(_write(tmp_path, GOOD.replace("n = 1024, 2048, 4096", "n =")))

    def test_mismatched_param_lists(self, tmp_path):
        bad = GOOD.replace("alpha1 = 1.0", "alpha1 = 1.0, 0.5")
        with pytest.raises(ConfigError, match="equal length"):
            parse_config(_write(tmp_path, bad))

    def test_unordered_n(self, tmp_path):
        bad = GOOD.replace("1024, 2048, 4096", "4096, 1024")
        with pytest.raises(ConfigError, match="increasing"):
            parse_config(_write(tmp_path, bad))

    def test_inadmissible_params_rejected(self, tmp_path):
        bad = GOOD.replace("a21 = 0.3", "a21 = 0.9")
        with pytest.raises(Exception):
            parse_config(_write(tmp_path, bad))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            parse_config(tmp_path / "nope.cfg")


class TestShippedConfigs:
    def test_all_parse(self):
        configs = shipped_configs()
        assert len(configs) >= 8
        for name, path in configs.items():
            cfg = parse_config(path)
            assert cfg.description, name

    def test_list_criteria_command(self, capsys):
        assert main(["list-criteria"]) == 0
        out = capsys.readouterr().out
        assert "c03_reduced_limits" in out
        assert "c10_determinism" in out


class TestMainCommands:
    def test_validate_ok(self, tmp_path, capsys):
        cfg = _write(tmp_path, GOOD)
        assert main(["validate", "--config", str(cfg)]) == 0
        assert "valid" in capsys.readouterr().out

    def test_validate_bad_exit_2(self, tmp_path, capsys):
        cfg = _write(tmp_path, GOOD.replace("qtable", "bogus"))
        assert main(["validate", "--config", str(cfg)]) == 2

    def test_run_qtable_outputs(self, tmp_path):
        cfg = _write(tmp_path, GOOD)
        out = tmp_path / "out"
        code = main(["run", "--config", str(cfg), "--out", str(out)])
        assert code in (0, 1)
        csv_path = out / "tiny.csv"
        summary_path = out / "tiny.json"
        assert csv_path.exists() and summary_path.exists()
        header = csv_path.read_text().splitlines()[0]
        assert header == ",".join(CSV_COLUMNS)
        summary = json.loads(summary_path.read_text())
        assert summary["kind"] == "qtable"
        assert summary["rows"] > 0

    def test_seed_override_changes_nothing_deterministic(self, tmp_path):
        # qtable has no Monte Carlo content: different seeds give equal CSVs
        cfg = _write(tmp_path, GOOD)
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        main(["run", "--config", str(cfg), "--out", str(out1), "--seed", "1"])
        main(["run", "--config", str(cfg), "--out", str(out2), "--seed", "2"])
        assert (out1 / "tiny.csv").read_bytes() == (out2 / "tiny.csv").read_bytes()

    def test_tree_mc_determinism(self, tmp_path):
        body = """
[experiment]
kind = tree-mc
name = det
seed = 99

[params]
alpha1 = 1.0
alpha2 = 1.0
a21 = 0.3

[grid]
n = 32
m = 8, 16
s = 0.5

[mc]
replicates = 500
batch_size = 256
"""
        cfg = _write(tmp_path, body)
        out1, out2 = tmp_path / "d1", tmp_path / "d2"
        c1 = main(["run", "--config", str(cfg), "--out", str(out1)])
        c2 = main(["run", "--config", str(cfg), "--out", str(out2)])
        assert c1 == c2
        assert (out1 / "det.csv").read_bytes() == (out2 / "det.csv").read_bytes()

    def test_threads_match_serial(self, tmp_path):
        body = GOOD.replace("alpha1 = 1.0", "alpha1 = 1.0, 0.5").replace(
            "alpha2 = 1.0", "alpha2 = 1.0, 1.0"
        ).replace("a21 = 0.3", "a21 = 0.3, 0.3")
        cfg = _write(tmp_path, body)
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        main(["run", "--config", str(cfg), "--out", str(out1), "--threads", "1"])
        main(["run", "--config", str(cfg), "--out", str(out2), "--threads", "2"])
        assert (out1 / "tiny.csv").read_bytes() == (out2 / "tiny.csv").read_bytes()


def test_report_row_formatting():
    row = ReportRow(
        experiment="e",
        point="p",
        inputs="n=4",
        finite_value=1.0 / 3.0,
        limit_value=None,
        abs_error=None,
        status="info",
    )
    rec = row.as_record()
    assert rec[3] == repr(1.0 / 3.0)
    assert rec[4] == "" and rec[5] == ""
