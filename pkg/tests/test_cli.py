import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from grownet.cli import main
from grownet.config import ConfigError, config_hash, load_config
from grownet.runner import train


def tiny_config(tmp_path, **over):
    cfg = {
        "encoding": "ndp",
        "env": "point_reacher",
        "master_seed": 5,
        "run_dir": str(tmp_path / "run"),
        "growth": {"growth_steps": 5, "max_cells": 30},
        "es": {"population_size": 8, "generations": 2, "eval_episodes": 1,
               "checkpoint_every": 1},
    }
    cfg.update(over)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path, cfg


def test_load_config_merges_and_validates(tmp_path):
    path, _ = tiny_config(tmp_path)
    cfg = load_config(path, {"master_seed": 9, "env": None})
    assert cfg.master_seed == 9
    assert cfg.env == "point_reacher"
    assert cfg.es.population_size == 8


@pytest.mark.parametrize("bad", [
    {"encoding": "cppn"},
    {"env": "walker"},
    {"workers": 0},
    {"es": {"population_size": 3}},
    {"es": {"unknown_knob": 1}},
    {"growth": {"growth_steps": 0}},
    {"nonsense": True},
])
def test_load_config_rejects(tmp_path, bad):
    path, _ = tiny_config(tmp_path, **bad)
    with pytest.raises(ConfigError):
        load_config(path)


def test_load_config_rejects_contradictory_intrinsic(tmp_path):
    path, _ = tiny_config(tmp_path, encoding="ndp",
                          growth={"intrinsic_enabled": False})
    with pytest.raises(ConfigError):
        load_config(path)


def test_encoding_drives_intrinsic_flag(tmp_path):
    path, _ = tiny_config(tmp_path, encoding="ndp_no_intrinsic")
    cfg = load_config(path)
    assert cfg.growth.intrinsic_enabled is False


def test_config_hash_ignores_run_dir_and_workers(tmp_path):
    path, _ = tiny_config(tmp_path)
    a = load_config(path, {"run_dir": "x"})
    b = load_config(path, {"run_dir": "y", "workers": 4})
    c = load_config(path, {"master_seed": 123})
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(c)


def test_train_command_writes_outputs(tmp_path):
    path, raw = tiny_config(tmp_path, es={"population_size": 8, "generations": 1,
                                          "eval_episodes": 1})
    assert main(["train", "--config", str(path)]) == 0
    run = Path(raw["run_dir"])
    assert (run / "config.json").exists()
    assert (run / "checkpoint.bin").exists()
    fitness = (run / "fitness.csv").read_text().strip().splitlines()
    assert len(fitness) == 2  # header + one generation
    assert fitness[0] == "generation,best,mean,std"


def test_train_reproducible_fitness_bytes(tmp_path):
    out = []
    for name in ("a", "b"):
        path, raw = tiny_config(tmp_path, run_dir=str(tmp_path / name))
        (tmp_path / f"cfg_{name}.json").write_text(path.read_text())
        assert main(["train", "--config", str(path)]) == 0
        out.append((Path(raw["run_dir"]) / "fitness.csv").read_bytes())
    assert out[0] == out[1]


def test_train_resume_continues_rows(tmp_path):
    # run 1: two generations straight through
    path, raw = tiny_config(tmp_path, run_dir=str(tmp_path / "full"))
    main(["train", "--config", str(path)])
    full = (Path(tmp_path / "full") / "fitness.csv").read_bytes()

    # run 2: one generation, then resume for the second
    path2, raw2 = tiny_config(tmp_path, run_dir=str(tmp_path / "split"),
                              es={"population_size": 8, "generations": 1,
                                  "eval_episodes": 1, "checkpoint_every": 1})
    main(["train", "--config", str(path2)])
    path3, _ = tiny_config(tmp_path, run_dir=str(tmp_path / "split"))
    assert main(["train", "--config", str(path3), "--resume"]) == 0
    split = (Path(tmp_path / "split") / "fitness.csv").read_bytes()
    assert split == full


def test_train_workers_do_not_change_fitness_bytes(tmp_path):
    path, raw = tiny_config(tmp_path, run_dir=str(tmp_path / "serial"))
    main(["train", "--config", str(path)])
    serial = (Path(tmp_path / "serial") / "fitness.csv").read_bytes()
    path2, _ = tiny_config(tmp_path, run_dir=str(tmp_path / "pooled"), workers=2)
    main(["train", "--config", str(path2)])
    pooled = (Path(tmp_path / "pooled") / "fitness.csv").read_bytes()
    assert serial == pooled


def test_eval_command_prints_return(tmp_path, capsys):
    path, raw = tiny_config(tmp_path)
    main(["train", "--config", str(path)])
    assert main(["eval", "--config", str(path), "--episodes", "3"]) == 0
    out = capsys.readouterr().out
    assert "return over 3 episodes:" in out


def test_trace_writes_snapshots(tmp_path):
    path, raw = tiny_config(tmp_path)
    assert main(["trace", "--config", str(path)]) == 0
    files = sorted((Path(raw["run_dir"]) / "trace").glob("step_*.json"))
    assert len(files) == 6  # steps 0..5 for growth_steps=5
    counts = []
    for f in files:
        snap = json.loads(f.read_text())
        counts.append(len(snap["cells"]))
    assert counts == sorted(counts)  # growth is monotone
    assert all("lineage" in c for c in json.loads(files[0].read_text())["cells"])


def test_trace_default_growth_writes_16_snapshots(tmp_path):
    path, raw = tiny_config(tmp_path, growth={})
    assert main(["trace", "--config", str(path)]) == 0
    files = list((Path(raw["run_dir"]) / "trace").glob("step_*.json"))
    assert len(files) == 16


def test_diversity_command_paired_runs(tmp_path):
    path, raw = tiny_config(tmp_path, encoding="ndp_no_intrinsic")
    assert main(["diversity", "--config", str(path)]) == 0
    run = Path(raw["run_dir"])
    for cond in ("with_inhibition", "without_inhibition"):
        csv_path = run / cond / "diversity.csv"
        assert csv_path.exists()
        rows = csv_path.read_text().strip().splitlines()
        growth_rows = [r for r in rows if r.startswith("per_growth_step")]
        assert len(growth_rows) == 6  # steps 0..5
    with_cfg = json.loads((run / "with_inhibition" / "config.json").read_text())
    without_cfg = json.loads((run / "without_inhibition" / "config.json").read_text())
    assert with_cfg["growth"]["inhibition_enabled"] is True
    assert without_cfg["growth"]["inhibition_enabled"] is False
    with_cfg["growth"]["inhibition_enabled"] = False
    with_cfg["run_dir"] = without_cfg["run_dir"]
    assert with_cfg == without_cfg  # everything else identical


def test_exit_codes(tmp_path):
    # config error -> 1
    assert main(["train", "--config", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["train", "--config", str(bad)]) == 1
    path, _ = tiny_config(tmp_path, encoding="bogus")
    assert main(["train", "--config", str(path)]) == 1
    # trace with a developmental command on a static encoding -> config error
    path2, _ = tiny_config(tmp_path, encoding="direct")
    assert main(["trace", "--config", str(path2)]) == 1
    # runtime failure -> 2 (checkpoint for another config)
    path3, raw3 = tiny_config(tmp_path, run_dir=str(tmp_path / "r3"))
    main(["train", "--config", str(path3)])
    path4, _ = tiny_config(tmp_path, run_dir=str(tmp_path / "r3"), master_seed=99)
    assert main(["eval", "--config", str(path4)]) == 2


def test_cli_entry_point_subprocess(tmp_path):
    path, raw = tiny_config(tmp_path, es={"population_size": 4, "generations": 1,
                                          "eval_episodes": 1})
    proc = subprocess.run(
        [sys.executable, "-m", "grownet.cli", "train", "--config", str(path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "finished at generation 1" in proc.stdout
