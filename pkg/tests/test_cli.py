import json
import os

import pytest

from d2drelay.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_USAGE,
    Command,
    UsageError,
    main,
    parse_invocation,
)
from d2drelay.env import load_map

SMALL_CFG = """
[map]
width_m = 300
height_m = 200
block_m = 45
street_m = 25
jitter_m = 8

[bs]
isd_m = 200

[d2d]
density_per_km2 = 150
pair_distance = 0.6
probe_positions = 4
probe_fading = 8
fading_samples = 8

[sweep]
axis = ue_density
grid = 0 150
strategies = SPR
trials = 3

[seed]
master = 5
"""


@pytest.fixture
def cfg_path(tmp_path):
    path = tmp_path / "scenario.cfg"
    path.write_text(SMALL_CFG)
    return str(path)


class TestParseInvocation:
    def test_sweep_invocation(self):
        cmd = parse_invocation(["sweep", "--config", "s.cfg", "--out", "r.csv", "--seed", "42"])
        assert cmd == Command(
            subcommand="sweep", config="s.cfg", out="r.csv", seed=42, workers=1, trials=None
        )

    def test_missing_subcommand(self):
        with pytest.raises(UsageError):
            parse_invocation([])

    def test_non_integer_seed_names_flag(self):
        with pytest.raises(UsageError, match="--seed"):
            parse_invocation(["sweep", "--out", "x.csv", "--seed", "abc"])

    def test_unknown_flag(self):
        with pytest.raises(UsageError):
            parse_invocation(["sweep", "--out", "x.csv", "--frobnicate"])

    def test_out_required_except_validate(self):
        with pytest.raises(UsageError, match="--out"):
            parse_invocation(["simulate"])
        cmd = parse_invocation(["validate"])
        assert cmd.out is None


class TestExitCodes:
    def test_usage_error_is_one(self, capsys):
        assert main([]) == EXIT_USAGE
        assert "usage error" in capsys.readouterr().err

    def test_config_error_is_two(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[d2d]\npower_w = lots\n")
        rc = main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o.csv")])
        assert rc == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_missing_config_file_is_two(self, tmp_path):
        rc = main(["simulate", "--config", "/no/such.cfg", "--out", str(tmp_path / "o.csv")])
        assert rc == EXIT_CONFIG


class TestGenerateMap:
    def test_writes_loadable_map(self, cfg_path, tmp_path, capsys):
        out = str(tmp_path / "city.json")
        assert main(["generate-map", "--config", cfg_path, "--out", out]) == EXIT_OK
        urban_map = load_map(open(out).read())
        assert urban_map.width == 300.0
        assert len(urban_map.buildings) >= 1
        assert not os.path.exists(out + ".tmp")


class TestSimulate:
    def test_writes_trials_and_manifest(self, cfg_path, tmp_path):
        out = str(tmp_path / "trials.csv")
        assert main(["simulate", "--config", cfg_path, "--out", out, "--trials", "4"]) == EXIT_OK
        lines = open(out).read().strip().splitlines()
        assert lines[0].startswith("trial,strategy,band,outcome")
        assert len(lines) == 5
        manifest = json.load(open(out + ".manifest.json"))
        assert manifest["master_seed"] == 5
        assert manifest["resolved_config"]["d2d"]["density_per_km2"] == "150"

    def test_seed_override_lands_in_manifest(self, cfg_path, tmp_path):
        out = str(tmp_path / "t.csv")
        main(["simulate", "--config", cfg_path, "--out", out, "--trials", "2", "--seed", "77"])
        assert json.load(open(out + ".manifest.json"))["master_seed"] == 77


class TestSweep:
    def test_byte_identical_reruns(self, cfg_path, tmp_path):
        out1 = str(tmp_path / "a.csv")
        out2 = str(tmp_path / "b.csv")
        assert main(["sweep", "--config", cfg_path, "--out", out1]) == EXIT_OK
        assert main(["sweep", "--config", cfg_path, "--out", out2]) == EXIT_OK
        assert open(out1, "rb").read() == open(out2, "rb").read()

    def test_row_count_is_grid_times_strategies(self, cfg_path, tmp_path):
        out = str(tmp_path / "rows.csv")
        main(["sweep", "--config", cfg_path, "--out", out, "--trials", "2"])
        lines = open(out).read().strip().splitlines()
        assert len(lines) == 1 + 2 * 1  # header + grid x strategies


class TestAnalyze:
    def test_writes_gap_table(self, cfg_path, tmp_path):
        out = str(tmp_path / "analysis.csv")
        assert main(["analyze", "--config", cfg_path, "--out", out, "--trials", "3000"]) == EXIT_OK
        lines = open(out).read().strip().splitlines()
        assert lines[0] == "check,params,analytic,empirical,abs_gap"
        kinds = {line.split(",")[0] for line in lines[1:]}
        assert kinds == {"a_function", "cc_link_success"}


class TestValidate:
    def test_clean_build_passes(self, cfg_path, capsys):
        assert main(["validate", "--config", cfg_path]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.count("PASS") == 4
        assert "FAIL" not in out
