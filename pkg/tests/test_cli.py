import json
import math

import pytest
from conftest import CONFIGS

from stackrl import config as cfgmod
from stackrl.cli import main
from stackrl.harness import ConfigError, read_csv

REF = str(CONFIGS / "reference.cfg")


def only_run_dir(base):
    dirs = [p for p in base.iterdir() if p.is_dir()]
    assert len(dirs) == 1
    return dirs[0]


def test_run_happy_path(tmp_path, capsys):
    status = main(["run", "--config", REF, "--seed", "7", "--set", "experiment.episodes=20", "--out", str(tmp_path)])
    assert status == 0
    d = only_run_dir(tmp_path)
    assert d.name.startswith("run-")
    cols = read_csv(d / "results.csv")
    assert len(cols["k"]) == 20
    for name in ("effective_config.cfg", "build_info.json", "run_info.json"):
        assert (d / name).exists()
    info = json.loads((d / "run_info.json").read_text())
    assert info["regret_cadence"] == 1 and info["carried_forward_increments"] is False
    assert str(d / "results.csv") in capsys.readouterr().out


def test_override_precedence(tmp_path):
    main(["run", "--config", REF, "--set", "experiment.episodes=5", "--set", "hyperparams.c1=0.5",
          "--seed", "9", "--out", str(tmp_path)])
    spec = cfgmod.load(only_run_dir(tmp_path) / "effective_config.cfg")
    cfg = spec.experiment()
    assert cfg.episodes == 5  # override beats file (2000)
    assert cfg.c1 == 0.5
    assert cfg.seed == 9
    assert cfg.failure_prob == 0.1  # file value
    assert cfg.cadence == 1 and cfg.alpha_f is None  # defaults
    assert cfg.model_path.endswith("reference.model")


def test_output_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv("STACKRL_OUTPUT_DIR", str(tmp_path / "env"))
    cfg = tmp_path / "small.cfg"
    cfg.write_text("[experiment]\nepisodes = 3\n")
    assert main(["run", "--config", str(cfg)]) == 0
    assert only_run_dir(tmp_path / "env").name.startswith("run-")


def test_checkpoint_written(tmp_path):
    main(["run", "--config", REF, "--set", "experiment.episodes=2", "--set", "experiment.checkpoint=true",
          "--out", str(tmp_path)])
    lines = (only_run_dir(tmp_path) / "checkpoint.jsonl").read_text().splitlines()
    assert len(lines) == 6


def test_sweep(tmp_path, capsys):
    status = main(["sweep", "--config", str(CONFIGS / "temperature_sweep.cfg"), "--set", "experiment.episodes=4",
                   "--out", str(tmp_path)])
    assert status == 0
    d = only_run_dir(tmp_path)
    text = (d / "sweep.csv").read_text()
    assert text.startswith("alpha_f,alpha_l,seed,k,")
    assert len(text.strip().split("\n")) == 1 + 8 * 4
    assert "8/8 cells completed" in capsys.readouterr().out
    assert not (d / "errors.txt").exists()


def test_sweep_without_grid(tmp_path, capsys):
    assert main(["sweep", "--config", REF, "--out", str(tmp_path)]) == 3


def test_validate_passes(capsys):
    assert main(["validate"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 10


def test_validate_failure_status(monkeypatch, capsys):
    from stackrl import validation

    monkeypatch.setattr(validation, "run_all", lambda echo=print: False)
    assert main(["validate"]) == 4


def test_fixture(capsys):
    assert main(["fixture"]) == 0
    out = capsys.readouterr().out
    assert "9.99" in out


def test_report(tmp_path, capsys):
    main(["run", "--config", REF, "--set", "experiment.episodes=20", "--out", str(tmp_path)])
    capsys.readouterr()
    assert main(["report", str(only_run_dir(tmp_path) / "results.csv")]) == 0
    out = capsys.readouterr().out
    assert "episodes            20" in out and "leader ratio" in out


def test_report_missing(tmp_path, capsys):
    assert main(["report", str(tmp_path / "missing.csv")]) == 3
    err = capsys.readouterr().err.strip()
    assert err.startswith("error: FileNotFoundError:") and "\n" not in err


def test_report_malformed(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n")
    assert main(["report", str(p)]) == 3


def test_unknown_verb(capsys):
    assert main(["train"]) == 2
    assert capsys.readouterr().err.startswith("error: UsageError:")


def test_unreadable_config(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.cfg")]) == 3


def test_bad_config_key(tmp_path):
    p = tmp_path / "x.cfg"
    p.write_text("[experiment]\ntemperature = 3\n")
    assert main(["run", "--config", str(p), "--out", str(tmp_path)]) == 3


def test_parse_values():
    spec = cfgmod.load(None, ["hyperparams.alpha_f=inf", "hyperparams.beta=none", "experiment.wall_clock=true"])
    cfg = spec.experiment()
    assert cfg.alpha_f == math.inf and cfg.beta is None and cfg.wall_clock is True
    with pytest.raises(ConfigError):
        cfgmod.load(None, ["experiment.episodes"])
    with pytest.raises(ConfigError):
        cfgmod.load(None, ["experiment.episodes=many"])


def test_dumps_round_trip(tmp_path):
    spec = cfgmod.load(REF, ["hyperparams.alpha_f=inf"])
    p = tmp_path / "echo.cfg"
    p.write_text(cfgmod.dumps(spec.experiment(), spec.output_dir, {"c1": [0.1, 0.2]}))
    again = cfgmod.load(p)
    assert again.experiment() == spec.experiment()
    assert again.output_dir == "runs" and again.sweep == {"c1": [0.1, 0.2]}
