import json
import subprocess
import sys

import pytest

from irsshare.cli import EXIT_BAD_INPUT, EXIT_FAILED, EXIT_OK, main
from irsshare.harness import read_csv, read_json


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text("schema_version: 1\nl_side: 4\nn_mnos: 2\nseed: 3\noptimizer:\n  restarts: 2\n")
    return path


def test_run_writes_csv_json_and_plot(tmp_path, small_config, capsys):
    out = tmp_path / "res" / "random.csv"
    code = main(["run", "--config", str(small_config), "--scheme", "random", "--drops", "3",
                 "--out", str(out), "--emit", "csv,json,plot"])
    assert code == EXIT_OK
    (rec,) = read_csv(out)
    assert read_json(out.with_suffix(".json")) == [rec]
    assert out.with_suffix(".svg").read_text().startswith("<?xml")
    assert (rec.scheme_id, rec.n_drops, rec.seed, rec.axis_value) == ("random", 3, 3, 16)
    assert "random: mean min rate" in capsys.readouterr().out


def test_run_dumps_channels_and_trace(tmp_path, small_config):
    dump, trace = tmp_path / "ch.jsonl", tmp_path / "trace.csv"
    code = main(["run", "--config", str(small_config), "--scheme", "sharing", "--drops", "2",
                 "--seed", "9", "--out", str(tmp_path / "s.csv"),
                 "--dump-channels", str(dump), "--trace", str(trace)])
    assert code == EXIT_OK
    lines = dump.read_text().splitlines()
    assert len(lines) == 2
    first = json.loads(lines[0])
    assert first["drop"] == 0 and len(first["users"]) == 2
    rows = trace.read_text().splitlines()
    assert rows[0] == "iter,min_rate,argmin_user,step"
    rates = [float(r.split(",")[1]) for r in rows[1:]]
    assert rates == sorted(rates)


def test_sweep_outputs(tmp_path, small_config, capsys):
    code = main(["sweep", "--axis", "mnos", "--values", "1,2", "--config", str(small_config),
                 "--out", str(tmp_path), "--drops", "2", "--emit", "csv,json,plot"])
    assert code == EXIT_OK
    recs = read_csv(tmp_path / "sweep_mnos.csv")
    assert len(recs) == 10
    assert read_json(tmp_path / "sweep_mnos.json") == recs
    assert (tmp_path / "sweep_mnos.svg").exists()
    assert "wrote" in capsys.readouterr().out


def test_check_commands_exit_codes(capsys):
    assert main(["check", "oracle"]) == EXIT_OK
    assert "20/20" in capsys.readouterr().out
    assert main(["check", "oracle", "--max-iters", "1"]) == EXIT_FAILED
    assert main(["check", "grad", "--json"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "M=16, K=2, N=3" in out and out.rstrip().endswith("PASS")
    assert main(["check", "grad", "--perturb", "0.01"]) == EXIT_FAILED
    assert capsys.readouterr().out.rstrip().endswith("FAIL")


@pytest.mark.parametrize("text,fragment", [
    ("l_side: 0\n", "l_side"),
    ("bogus: 1\n", "unknown config keys"),
    ("schema_version: 7\n", "schema_version"),
    ("- a\n- b\n", "mapping"),
    ("optimizer:\n  restarts: 0\n", "optimizer"),
    ("optimizer:\n  nope: 1\n", "optimizer"),
])
def test_bad_config_exit_code(tmp_path, text, fragment, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text(text)
    code = main(["run", "--config", str(cfg), "--scheme", "random", "--drops", "1",
                 "--out", str(tmp_path / "x.csv")])
    assert code == EXIT_BAD_INPUT
    assert fragment in capsys.readouterr().err


def test_missing_config_and_bad_sweep_values(tmp_path):
    assert main(["run", "--config", str(tmp_path / "none.yaml"), "--scheme", "random",
                 "--out", str(tmp_path / "x.csv")]) == EXIT_BAD_INPUT
    assert main(["sweep", "--axis", "elements", "--values", "50", "--out", str(tmp_path),
                 "--drops", "1"]) == EXIT_BAD_INPUT


@pytest.mark.parametrize("argv", [
    ["run", "--scheme", "bogus", "--out", "x.csv"],
    ["run", "--scheme", "random", "--out", "x.csv", "--seed", "-1"],
    ["run", "--scheme", "random", "--out", "x.csv", "--seed", str(2**64)],
    ["run", "--scheme", "random", "--out", "x.csv", "--drops", "0"],
    ["run", "--scheme", "random", "--out", "x.csv", "--emit", "xml"],
    ["sweep", "--axis", "height", "--values", "1", "--out", "."],
    ["sweep", "--axis", "mnos", "--values", "a,b", "--out", "."],
    ["check", "nothing"],
])
def test_argument_errors_exit_two(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == EXIT_BAD_INPUT


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "irsshare", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "sweep" in proc.stdout


def test_shipped_config_matches_defaults():
    from pathlib import Path

    from irsshare.optimizer import OptimizerOptions
    from irsshare.scenario import Scenario, load_config

    sc, opt = load_config(Path(__file__).parents[1] / "configs" / "default.yaml")
    assert sc == Scenario()
    assert OptimizerOptions.from_dict(opt) == OptimizerOptions()
