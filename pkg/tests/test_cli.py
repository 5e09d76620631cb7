"""End-to-end checks of the command-line interface and its artifacts."""

import json
import subprocess
import sys

import numpy as np
import pytest

from stable_smallball import DIAGNOSTIC_NOTE, GridSpec, grid_gap_ratios
from stable_smallball.cli import main


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    monkeypatch.delenv("STABLE_SMALLBALL_OUT", raising=False)


def _read_json(path):
    return json.loads(path.read_text())


def _read_jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


class TestSimulate:
    def test_single_path_deterministic(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            rc = main(["simulate", "--n", "1", "--steps", "64", "--seed", "5",
                       "--out", str(out)])
            assert rc == 0
        assert (a / "path.csv").read_bytes() == (b / "path.csv").read_bytes()
        assert (a / "jumps.csv").read_bytes() == (b / "jumps.csv").read_bytes()

    def test_seed_changes_output(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["simulate", "--n", "1", "--steps", "64", "--seed", "1", "--out", str(a)])
        main(["simulate", "--n", "1", "--steps", "64", "--seed", "2", "--out", str(b)])
        assert (a / "path.csv").read_bytes() != (b / "path.csv").read_bytes()

    def test_increment_sampler_has_no_jump_file(self, tmp_path):
        rc = main(["simulate", "--sampler", "increments", "--n", "1",
                   "--steps", "32", "--out", str(tmp_path)])
        assert rc == 0
        assert (tmp_path / "path.csv").exists()
        assert not (tmp_path / "jumps.csv").exists()

    def test_multi_path_naming(self, tmp_path):
        rc = main(["simulate", "--n", "3", "--steps", "32", "--out", str(tmp_path)])
        assert rc == 0
        for i in range(3):
            assert (tmp_path / f"path_{i:04d}.csv").exists()

    def test_eps_controls_jump_resolution(self, tmp_path):
        coarse, fine = tmp_path / "c", tmp_path / "f"
        main(["simulate", "--n", "1", "--steps", "64", "--eps", "0.5",
              "--out", str(coarse)])
        main(["simulate", "--n", "1", "--steps", "64", "--eps", "0.05",
              "--out", str(fine)])
        n_coarse = len((coarse / "jumps.csv").read_text().splitlines())
        n_fine = len((fine / "jumps.csv").read_text().splitlines())
        assert n_fine > n_coarse

    def test_run_config_written(self, tmp_path):
        main(["simulate", "--n", "1", "--steps", "32", "--out", str(tmp_path)])
        cfg = _read_json(tmp_path / "run_config.json")
        assert cfg["subcommand"] == "simulate"
        assert cfg["steps"] == 32


class TestSmallball:
    def test_crude_single_record(self, tmp_path):
        rc = main(["smallball", "crude", "--n", "400", "--steps", "128",
                   "--r", "1.0", "--c", "0.2", "--out", str(tmp_path)])
        assert rc == 0
        rec = _read_json(tmp_path / "crude.json")
        assert set(rec) >= {"query", "estimate", "stderr", "ci95", "n", "flags",
                            "config"}
        assert rec["query"]["regime"] == "middle"
        assert rec["n"] == 400

    def test_crude_sweep_ldjson_and_csv(self, tmp_path):
        rc = main(["smallball", "crude", "--n", "300", "--steps", "128",
                   "--r", "0.8,1.0", "--csv", "--out", str(tmp_path)])
        assert rc == 0
        recs = _read_jsonl(tmp_path / "crude.jsonl")
        assert [r["query"]["r"] for r in recs] == [0.8, 1.0]
        table = (tmp_path / "crude_sweep.csv").read_text().splitlines()
        assert table[0] == "r,estimate,stderr"
        assert len(table) == 3

    def test_worker_count_does_not_change_results(self, tmp_path):
        outs = {}
        for w in ("1", "2"):
            out = tmp_path / f"w{w}"
            rc = main(["smallball", "crude", "--n", "400", "--steps", "128",
                       "--r", "0.9", "--c", "0.2", "--workers", w,
                       "--seed", "3", "--out", str(out)])
            assert rc == 0
            rec = _read_json(out / "crude.json")
            cfg = rec.pop("config")
            cfg.pop("workers"), cfg.pop("out")
            outs[w] = (rec, cfg)
        assert outs["1"] == outs["2"]

    def test_is_estimator_record(self, tmp_path):
        rc = main(["smallball", "is", "--n", "400", "--steps", "128",
                   "--r", "0.8", "--c", "0.2", "--out", str(tmp_path)])
        assert rc == 0
        rec = _read_json(tmp_path / "is.json")
        assert rec["ess"] <= rec["n"]
        assert rec["query"]["c"] == pytest.approx(0.2)

    def test_lam_sets_small_regime(self, tmp_path):
        rc = main(["smallball", "crude", "--n", "200", "--steps", "128",
                   "--r", "0.8", "--lam", "0.3", "--out", str(tmp_path)])
        assert rc == 0
        rec = _read_json(tmp_path / "crude.json")
        assert rec["query"]["regime"] == "small"
        assert rec["query"]["shift_scale"] == pytest.approx(0.3)

    def test_c_and_lam_conflict(self, tmp_path, capsys):
        rc = main(["smallball", "crude", "--r", "0.8", "--c", "0.2",
                   "--lam", "0.3", "--out", str(tmp_path)])
        assert rc == 2
        assert "either 'c' or 'lam'" in capsys.readouterr().err

    def test_anderson_artifact(self, tmp_path):
        rc = main(["smallball", "anderson", "--n", "1500", "--steps", "512",
                   "--r", "1.0", "--out", str(tmp_path)])
        rec = _read_json(tmp_path / "anderson.json")
        assert rc == (0 if rec["n_flagged"] == 0 else 1)
        assert rec["rows"][0]["label"] == "zero"
        assert rec["rows"][0]["shift_scale"] == 0.0
        assert len(rec["rows"]) == 6
        assert rec["n_flagged"] == 0

    def test_tail_artifact(self, tmp_path):
        rc = main(["smallball", "tail", "--n", "2000", "--steps", "256",
                   "--x", "10,20", "--csv", "--out", str(tmp_path)])
        assert rc == 0
        rec = _read_json(tmp_path / "tail.json")
        assert rec["x"] == [10.0, 20.0]
        assert len(rec["p_hat"]) == 2 and len(rec["k_hat"]) == 2
        assert rec["slope"] < 0.0
        lines = (tmp_path / "tail.csv").read_text().splitlines()
        assert lines[0] == "x,p_hat,stderr"

    def test_shift_knot_file(self, tmp_path):
        knots = [[0.0, 0.0], [0.5, 0.2], [1.0, 0.0]]
        shift_file = tmp_path / "shift.json"
        shift_file.write_text(json.dumps(knots))
        rc = main(["smallball", "crude", "--n", "200", "--steps", "128",
                   "--r", "0.9", "--c", "0.2", "--shift", str(shift_file),
                   "--out", str(tmp_path)])
        assert rc == 0
        rec = _read_json(tmp_path / "crude.json")
        assert rec["query"]["shift_knots"] == knots

    def test_missing_shift_file(self, tmp_path, capsys):
        rc = main(["smallball", "crude", "--r", "0.9", "--c", "0.2",
                   "--shift", str(tmp_path / "nope.json"), "--out", str(tmp_path)])
        assert rc == 2
        assert "file not found" in capsys.readouterr().err

    def test_malformed_shift_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        rc = main(["smallball", "crude", "--r", "0.9", "--c", "0.2",
                   "--shift", str(bad), "--out", str(tmp_path)])
        assert rc == 2
        assert "bad knot file" in capsys.readouterr().err


class TestConstants:
    def test_record_shape_without_mc(self, tmp_path):
        rc = main(["constants", "--alpha", "1.5", "--grid", "256",
                   "--out", str(tmp_path)])
        assert rc == 0
        rec = _read_json(tmp_path / "constants.json")
        assert set(rec) == {"alpha", "c_alpha", "K_spectral", "K_mc", "C_alpha",
                            "config"}
        assert rec["K_mc"] is None
        assert rec["c_alpha"] == pytest.approx(3.3421710328413340032, rel=1e-12)

    def test_alpha_list_gives_ldjson(self, tmp_path):
        rc = main(["constants", "--alpha", "1.2,1.8", "--grid", "128",
                   "--out", str(tmp_path)])
        assert rc == 0
        recs = _read_jsonl(tmp_path / "constants.jsonl")
        assert [r["alpha"] for r in recs] == [1.2, 1.8]

    def test_mc_fit_included_when_requested(self, tmp_path):
        rc = main(["constants", "--alpha", "1.5", "--grid", "128",
                   "--mc-n", "400", "--steps", "128", "--mc-r", "0.8,1.0,1.2",
                   "--out", str(tmp_path)])
        assert rc == 0
        rec = _read_json(tmp_path / "constants.json")
        assert rec["K_mc"] is not None and rec["K_mc"] > 0.0

    def test_bad_alpha_list(self, tmp_path, capsys):
        rc = main(["constants", "--alpha", "1.5,abc", "--out", str(tmp_path)])
        assert rc == 2
        assert "config error" in capsys.readouterr().err


class TestLil:
    def test_grid_csv(self, tmp_path):
        rc = main(["lil", "grid", "--k-min", "21", "--k-max", "30",
                   "--out", str(tmp_path)])
        assert rc == 0
        lines = (tmp_path / "grid.csv").read_text().splitlines()
        assert lines[0] == "k,logT"
        rows = np.loadtxt(tmp_path / "grid.csv", delimiter=",", skiprows=1)
        spec = GridSpec(kind="lower", k_min=21, k_max=30)
        assert np.array_equal(rows[:, 0], spec.k_values())
        assert np.allclose(rows[:, 1], spec.log_times(), rtol=1e-15)

    def test_ratios_record(self, tmp_path):
        rc = main(["lil", "ratios", "--k", "1000000", "--delta", "0.5",
                   "--out", str(tmp_path)])
        assert rc == 0
        rec = _read_json(tmp_path / "ratios.json")
        r1, r2, r3 = grid_gap_ratios(10**6, 0.5, 1.5)
        assert rec["r1"] == pytest.approx(r1, rel=1e-15)
        assert rec["r2"] == pytest.approx(r2, rel=1e-15)
        assert rec["r3"] == pytest.approx(r3, rel=1e-15)

    def test_distance_sweep_csv(self, tmp_path, capsys):
        rc = main(["lil", "distance-sweep", "--k-min", "1000", "--k-max", "1020",
                   "--steps", "128", "--out", str(tmp_path)])
        assert rc == 0
        assert DIAGNOSTIC_NOTE in capsys.readouterr().out
        lines = (tmp_path / "distances.csv").read_text().splitlines()
        assert lines[0] == "k,logT,delta,distance,running_min"
        rows = np.loadtxt(tmp_path / "distances.csv", delimiter=",", skiprows=1)
        assert rows.shape[0] == 21
        assert np.all(np.diff(rows[:, 4]) <= 0.0)
        assert np.all(rows[:, 4] <= rows[:, 3])

    def test_integral_test_classification(self, tmp_path):
        rc = main(["lil", "integral-test", "--log-power", "1.4",
                   "--alpha", "1.5", "--out", str(tmp_path)])
        assert rc == 0
        rec = _read_json(tmp_path / "integral_test.json")
        assert rec["classification"] == "converges"
        assert rec["method"] == "analytic"

    def test_integral_test_requires_log_power(self, tmp_path, capsys):
        rc = main(["lil", "integral-test", "--out", str(tmp_path)])
        assert rc == 2
        assert "log_power" in capsys.readouterr().err

    def test_grid_stays_in_log_space_past_float_horizon(self, tmp_path):
        # log T_40 = 1600 would overflow exp(); storing logT keeps it exact
        rc = main(["lil", "grid", "--kind", "upper", "--k-min", "1",
                   "--k-max", "40", "--gamma", "2.0", "--out", str(tmp_path)])
        assert rc == 0
        rows = np.loadtxt(tmp_path / "grid.csv", delimiter=",", skiprows=1)
        assert rows[-1, 1] == 1600.0

    def test_bad_grid_kind_reported(self, tmp_path, capsys):
        rc = main(["lil", "distance-sweep", "--k-min", "10", "--k-max", "20",
                   "--steps", "64", "--out", str(tmp_path)])
        assert rc == 2
        assert "k >= 21" in capsys.readouterr().err


class TestConfigFile:
    def _write(self, tmp_path, text):
        cfg = tmp_path / "run.ini"
        cfg.write_text(text)
        return cfg

    def test_layering_and_flag_override(self, tmp_path):
        cfg = self._write(tmp_path, """
[common]
alpha = 1.8
seed = 7
n = 200

[smallball.crude]
r = 0.9
steps = 128
""")
        rc = main(["smallball", "crude", "--config", str(cfg), "--n", "150",
                   "--out", str(tmp_path)])
        assert rc == 0
        resolved = _read_json(tmp_path / "run_config.json")
        assert resolved["alpha"] == 1.8
        assert resolved["seed"] == 7
        assert resolved["r"] == "0.9"
        assert resolved["steps"] == 128
        assert resolved["n"] == 150  # explicit flag beats the config file

    def test_unknown_key_is_named(self, tmp_path, capsys):
        cfg = self._write(tmp_path, "[smallball.crude]\nradius = 1.0\n")
        rc = main(["smallball", "crude", "--config", str(cfg), "--out", str(tmp_path)])
        assert rc == 2
        err = capsys.readouterr().err
        assert "unknown config key 'radius' in section [smallball.crude]" in err

    def test_subcommand_key_rejected_in_common(self, tmp_path, capsys):
        cfg = self._write(tmp_path, "[common]\nr = 0.9\n")
        rc = main(["smallball", "crude", "--config", str(cfg), "--out", str(tmp_path)])
        assert rc == 2
        assert "unknown config key 'r' in section [common]" in capsys.readouterr().err

    def test_unknown_section_rejected(self, tmp_path, capsys):
        cfg = self._write(tmp_path, "[smallbal]\nr = 0.9\n")
        rc = main(["smallball", "crude", "--config", str(cfg), "--out", str(tmp_path)])
        assert rc == 2
        assert "unknown config section [smallbal]" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path, capsys):
        rc = main(["smallball", "crude", "--config", str(tmp_path / "nope.ini"),
                   "--out", str(tmp_path)])
        assert rc == 2
        assert "config file not found" in capsys.readouterr().err

    def test_bad_value_type(self, tmp_path, capsys):
        cfg = self._write(tmp_path, "[common]\nseed = soon\n")
        rc = main(["simulate", "--config", str(cfg), "--n", "1", "--steps", "16",
                   "--out", str(tmp_path)])
        assert rc == 2
        assert "config key 'seed'" in capsys.readouterr().err

    def test_bad_sampler_via_config(self, tmp_path, capsys):
        cfg = self._write(tmp_path, "[simulate]\nsampler = euler\n")
        rc = main(["simulate", "--config", str(cfg), "--n", "1", "--steps", "16",
                   "--out", str(tmp_path)])
        assert rc == 2
        assert "sampler" in capsys.readouterr().err

    def test_env_overrides_out_dir(self, tmp_path, monkeypatch):
        env_dir = tmp_path / "env_dest"
        monkeypatch.setenv("STABLE_SMALLBALL_OUT", str(env_dir))
        rc = main(["simulate", "--n", "1", "--steps", "16",
                   "--out", str(tmp_path / "flag_dest")])
        assert rc == 0
        assert (env_dir / "path.csv").exists()
        assert not (tmp_path / "flag_dest").exists()


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "stable_smallball", "lil", "ratios",
         "--k", "1000000", "--out", str(tmp_path)],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert (tmp_path / "ratios.json").exists()


def test_console_script_help():
    proc = subprocess.run(["stable-smallball", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    for name in ("simulate", "smallball", "constants", "lil", "selftest"):
        assert name in proc.stdout
