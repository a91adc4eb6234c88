import json

import pytest
import yaml

from mildbbm import __version__
from mildbbm.cli import build_parser, main, overrides_from_args
from mildbbm.config import ExperimentConfig, load_config


def test_defaults_and_overrides(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump({"experiment": "fk-moment", "dim": 2, "reps": 7,
                                    "params": {"nu": 2.0}}))
    cfg = load_config(path, {"reps": 9, "params": {"beta1": 0.5}})
    assert cfg.dim == 2 and cfg.reps == 9
    assert cfg.params == {"nu": 2.0, "a": 0.5, "beta1": 0.5, "beta2": 1.0}


@pytest.mark.parametrize("bad", [
    {"experiment": "nope"},
    {"experiment": "simulate", "dim": 0},
    {"experiment": "simulate", "t_grid": [2.0, 1.0]},
    {"experiment": "simulate", "t_grid": []},
    {"experiment": "simulate", "reps": -1},
    {"experiment": "simulate", "params": {"beta1": 2.0}},
    {"experiment": "simulate", "params": {"gamma": 1.0}},
    {"experiment": "simulate", "bogus": 1},
    {"experiment": "simulate", "h": 0},
])
def test_validation_errors(bad):
    with pytest.raises(ValueError):
        load_config(overrides=bad)


def test_missing_experiment():
    with pytest.raises(ValueError):
        load_config(overrides={})


def test_non_mapping_file(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("- 1\n- 2\n")
    with pytest.raises(ValueError):
        load_config(path, experiment="constants")


def test_header_excludes_out():
    cfg = load_config(overrides={"experiment": "constants", "out": "x.csv"})
    text = "\n".join(cfg.header_lines())
    assert "x.csv" not in text and "seed" in text
    assert yaml.safe_load(text)["experiment"] == "constants"


def test_global_flags_before_or_after():
    p = build_parser()
    a = p.parse_args(["--seed", "3", "constants", "--dim", "1", "--nu", "1"])
    b = p.parse_args(["constants", "--dim", "1", "--nu", "1", "--seed", "3"])
    assert overrides_from_args(a) == overrides_from_args(b)
    assert a.seed == b.seed == 3


def test_time_flags_merge():
    p = build_parser()
    a = p.parse_args(["simulate", "--t", "3", "--checkpoints", "1,2,5"])
    assert overrides_from_args(a)["t_grid"] == [1.0, 2.0, 3.0]


def test_constants_command(tmp_path, capsys):
    out = tmp_path / "c.csv"
    assert main(["constants", "--dim", "2", "--nu", "1", "--out", str(out), "--check"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == f"# mildbbm {__version__}"
    body = [ln for ln in lines if not ln.startswith("#")]
    assert body[0] == "name,value"
    assert any(ln.startswith("lambda_d,2.89159") for ln in body)
    assert "PASS" in capsys.readouterr().out


def test_env_gen_and_clearing(tmp_path, capsys):
    fpath = tmp_path / "f.json"
    assert main(["env", "gen", "--dim", "2", "--nu", "0.3", "--radius", "0.5", "--box", "6",
                 "--seed", "4", "--out", str(fpath)]) == 0
    obj = json.loads(fpath.read_text())
    assert obj["dim"] == 2 and obj["params"]["nu"] == 0.3
    out = tmp_path / "c.csv"
    assert main(["env", "clearing", "--field", str(fpath), "--rho", "0.3", "--search-l", "2",
                 "--out", str(out), "--check"]) == 0
    assert "found,center,radius,search_radius" in out.read_text()


def test_simulate_with_plot(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["simulate", "--mode", "obstacle", "--dim", "1", "--t", "2", "--reps", "5",
                 "--box", "10", "--out", str(out), "--plot"]) == 0
    assert out.exists() and out.with_suffix(".gp").exists()


@pytest.mark.parametrize("argv", [
    ["yule", "coalescence", "--t", "2", "--reps", "3000"],
    ["fk-moment", "--dim", "1", "--box", "10", "--t", "1", "--paths", "2000"],
    ["exit-survival", "--dim", "1", "--R", "1", "--t-grid", "0.5,1", "--paths", "5000"],
    ["product-bound", "--t", "0.5", "--reps", "300", "--radii", "2"],
    ["local-growth", "--dim", "1", "--box", "10", "--t-grid", "1,2", "--reps", "20"],
    ["simulate", "--mode", "absorbed", "--absorb-radius", "2", "--t", "1", "--reps", "5"],
])
def test_commands_run_and_are_thread_independent(tmp_path, argv):
    outs = []
    for threads in ("1", "4"):
        out = tmp_path / f"o{threads}.csv"
        assert main(argv + ["--seed", "2", "--threads", threads, "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_check_flag_sets_exit_status(tmp_path):
    out = tmp_path / "y.csv"
    # a tiny KS sample still passes; the status is 0
    assert main(["yule", "coalescence", "--t", "1", "--reps", "500", "--check",
                 "--out", str(out)]) == 0


def test_bad_input_exit_code(capsys):
    assert main(["constants", "--dim", "0", "--nu", "1"]) == 2
    assert "error" in capsys.readouterr().err
    assert main(["env", "clearing", "--field", "/nonexistent.json", "--rho", "1",
                 "--search-l", "1"]) == 2


def test_check_subcommand_runs_selected(capsys):
    assert main(["check", "--only", "1", "--check"]) == 0
    assert "PASS criterion  1" in capsys.readouterr().out


def test_config_dataclass_roundtrip():
    cfg = ExperimentConfig("constants").validate()
    d = cfg.to_dict()
    assert ExperimentConfig(**d).validate() == cfg


def test_config_file_names_the_experiment(tmp_path, capsys):
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump({"experiment": "constants", "dim": 3,
                                    "params": {"nu": 2.0}}))
    out = tmp_path / "c.csv"
    assert main(["--config", str(path), "--out", str(out)]) == 0
    assert "# dim: 3" in out.read_text()
    with pytest.raises(SystemExit):
        main([])


def test_constants_table_matches_library(tmp_path):
    from mildbbm.asymptotics import growth_constants
    out = tmp_path / "c.csv"
    assert main(["constants", "--dim", "3", "--nu", "0.7", "--out", str(out)]) == 0
    body = [ln.split(",") for ln in out.read_text().splitlines() if not ln.startswith("#")][1:]
    table = dict(growth_constants(3, 0.7).rows())
    assert len(body) == len(table)
    for name, value in body:
        assert float(value) == pytest.approx(float(table[name]), rel=1e-14)
    first = out.read_bytes()
    assert main(["constants", "--dim", "3", "--nu", "0.7", "--out", str(out)]) == 0
    assert out.read_bytes() == first
