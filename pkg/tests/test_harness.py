import csv
import json

import numpy as np
import pytest

from fedsched import cli
from fedsched.core import ConfigError
from fedsched.harness import (BaselineScheduler, PpoScheduler, bench, make_scheduler, run_episode,
                              train_agent)
from fedsched.records import read_round_records
from fedsched.scheduler.ppo import PpoAgent

from conftest import ROOT


def test_target_below_chance_stops_after_one_round(small_cfg):
    res = run_episode(small_cfg.replace(target_accuracy=0.0), BaselineScheduler("fedavg"), 1)
    assert res.rounds_used == 1 and res.reached_target


def test_round_cap(small_cfg):
    res = run_episode(small_cfg.replace(target_accuracy=1.0, max_rounds=5), BaselineScheduler("fedavg"), 1)
    assert res.rounds_used == 5 and not res.reached_target


@pytest.mark.parametrize("kind", ["greedy", "fedavg", "max_gradient", "ascend"])
def test_bookkeeping_and_constraints(small_cfg, kind):
    res = run_episode(small_cfg, BaselineScheduler(kind), 3)
    assert res.total_wallclock_s == pytest.approx(sum(r.round_time_s for r in res.per_round), abs=1e-12)
    for r in res.per_round:
        assert r.round_time_s == max(r.per_user_time_s)
    assert res.violations == []


def test_episode_determinism(small_cfg):
    a = run_episode(small_cfg, BaselineScheduler("ascend"), 7, alloc="ldra")
    b = run_episode(small_cfg, BaselineScheduler("ascend"), 7, alloc="ldra")
    assert [r.scheduled_set for r in a.per_round] == [r.scheduled_set for r in b.per_round]
    assert [r.round_time_s for r in a.per_round] == [r.round_time_s for r in b.per_round]
    assert a.final_accuracy == b.final_accuracy


def test_unknown_scheduler_and_missing_snapshot(tmp_path):
    with pytest.raises(ValueError):
        BaselineScheduler("roundrobin")
    with pytest.raises(ConfigError):
        make_scheduler("ppo", tmp_path / "absent")


def test_single_training_episode_makes_no_update(small_cfg, tmp_path):
    agent, curve = train_agent(small_cfg, 1, tmp_path)
    assert agent.n_updates == 0
    init = PpoAgent.load(tmp_path / "snapshot")
    assert np.array_equal(init.actor.params, agent.actor.params)
    rows = list(csv.reader(open(tmp_path / "learning_curve.csv")))
    assert rows[0] == ["episode", "return", "rounds", "final_accuracy"] and len(rows) == 2


def test_learning_curve_rows(small_cfg, tmp_path):
    _, curve = train_agent(small_cfg, 3, tmp_path)
    assert len(curve) == 3
    assert len(list(csv.reader(open(tmp_path / "learning_curve.csv")))) == 4
    with pytest.raises(ValueError):
        train_agent(small_cfg, 0)


def test_ppo_scheduler_runs(small_cfg, tmp_path):
    train_agent(small_cfg, 1, tmp_path)
    sched = make_scheduler("ppo", tmp_path / "snapshot")
    assert isinstance(sched, PpoScheduler)
    a = run_episode(small_cfg, sched, 4)
    b = run_episode(small_cfg, make_scheduler("ppo", tmp_path / "snapshot"), 4)
    assert [r.scheduled_set for r in a.per_round] == [r.scheduled_set for r in b.per_round]


def test_bench_rows_and_csv(small_cfg, tmp_path):
    rows, medians, _ = bench(small_cfg, ["fedavg", "greedy"], [1, 2, 3], out_dir=tmp_path)
    assert len(rows) == 6 and set(medians) == {"fedavg", "greedy"}
    again, _, _ = bench(small_cfg, ["fedavg", "greedy"], [1, 2, 3])
    assert again == rows
    lines = list(csv.reader(open(tmp_path / "bench.csv")))
    assert lines[0] == ["scheduler", "seed", "a", "target", "rounds", "wallclock_s", "reached"]
    assert len(lines) == 7


def test_bench_sweep(small_cfg):
    rows, _, _ = bench(small_cfg, ["fedavg"], [1], sweep_a=[0.0, 0.5])
    assert [r[2] for r in rows] == [0.0, 0.5]
    with pytest.raises(ValueError):
        bench(small_cfg, ["fedavg"], [1], sweep_a=[0.1], sweep_target=[0.5])


@pytest.fixture
def small_config_file(tmp_path, default_dict):
    p = tmp_path / "small.json"
    p.write_text(json.dumps(dict(default_dict, n_users=6, n_subcarriers=12, max_rounds=6)))
    return p


def test_cli_run_and_debug_dump(small_config_file, tmp_path, capsys):
    out = tmp_path / "run"
    code = cli.main(["run", "--config", str(small_config_file), "--scheduler", "fedavg",
                     "--out", str(out), "--debug-alloc", "--alloc", "ldra"])
    assert code == 0
    recs = read_round_records(out / "rounds.csv")
    dumps = (out / "alloc.jsonl").read_text().splitlines()
    assert len(recs) == len(dumps) >= 1
    assert "fedavg: rounds=" in capsys.readouterr().out


def test_cli_train_then_bench(small_config_file, tmp_path, capsys):
    train_dir = tmp_path / "train"
    assert cli.main(["train", "--config", str(small_config_file), "--episodes", "2",
                     "--out", str(train_dir)]) == 0
    assert cli.main(["bench", "--config", str(small_config_file), "--schedulers", "ppo,fedavg",
                     "--seeds", "2", "--snapshot", str(train_dir / "snapshot"),
                     "--out", str(tmp_path / "bench")]) == 0
    text = capsys.readouterr().out
    assert "ppo: median wallclock_s=" in text and "fedavg: median wallclock_s=" in text


def test_cli_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n_users": -1}))
    assert cli.main(["run", "--config", str(bad), "--scheduler", "fedavg", "--out", str(tmp_path)]) == 2
    assert cli.main(["run", "--config", str(ROOT / "configs" / "default.json"), "--scheduler", "ppo",
                     "--out", str(tmp_path)]) == 2
    assert "configuration error" in capsys.readouterr().err
