from __future__ import annotations

from pathlib import Path

import pytest

from maxrl import cli, experiments
from maxrl.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, EXIT_RUNTIME, RunConfig, main
from maxrl.experiments import read_csv_rows, strip_timestamp

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

TINY_TRAIN = """\
kind: train
agent: ppo_max
env: {name: bandit}
hyper: {n_envs: 4, minibatch_size: 4, epochs: 1}
seeds: [0, 1]
budget: 40
eval_interval: 20
eval_episodes: 2
"""


def test_counterexample_passes(capsys):
    assert main(["counterexample"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.strip().endswith("PASS")


def test_counterexample_deviation_exits_one(monkeypatch, capsys):
    real = experiments.counterexample_report

    def broken():
        rep = real()
        rep.det_greedy = "pi1"
        return rep

    monkeypatch.setattr(experiments, "counterexample_report", broken)
    assert main(["counterexample"]) == EXIT_FAIL
    assert "DEVIATION" in capsys.readouterr().out


def test_missing_config_exits_two(tmp_path, capsys):
    assert main(["train", "--config", str(tmp_path / "nope.yaml")]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


@pytest.mark.parametrize("text", [
    "kind: train\nbogus_key: 1\n",
    "kind: train\nseeds: []\n",
    "kind: train\nagent: sac\n",
    "kind: train\nhyper: {lr: -1.0}\n",
    "kind: train\nenv: {name: moon}\n",
    "kind: [unclosed\n",
])
def test_bad_configs_exit_two(tmp_path, text):
    path = tmp_path / "bad.yaml"
    path.write_text(text)
    assert main(["train", "--config", str(path), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_runtime_error_exits_three(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("n_states: 1\n")
    assert main(["solve", "--mdp", str(path), "--out", str(tmp_path)]) == EXIT_RUNTIME


def test_run_config_round_trip():
    cfg = RunConfig(agent="td3_max", env={"name": "reach", "t_max": 50}, hyper={"lr": 1e-3},
                    seeds=[1, 2], budget=123)
    back = RunConfig.loads(cfg.dumps())
    assert back == cfg
    assert back.dumps() == cfg.dumps()


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.yaml")), ids=lambda p: p.stem)
def test_shipped_configs_load(path):
    cfg = RunConfig.load(path)
    experiments.agent_config(cfg.agent, cfg.hyper)
    experiments.make_env_factory(cfg.env, cfg.agent)


def test_train_writes_reproducible_metrics(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(TINY_TRAIN)
    texts = []
    for k in range(2):
        out = tmp_path / f"out{k}"
        assert main(["train", "--config", str(path), "--out", str(out)]) == EXIT_OK
        texts.append((out / "metrics.csv").read_text())
        assert RunConfig.load(out / "config.yaml").seeds == [0, 1]
    assert texts[0].startswith("# schema=1\n# created=")
    assert strip_timestamp(texts[0]) == strip_timestamp(texts[1])
    rows = read_csv_rows(texts[0])
    assert [(r["seed"], r["env_steps"]) for r in rows] == [("0", "20"), ("0", "40"), ("1", "20"), ("1", "40")]


def test_seed_flag_overrides_config(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(TINY_TRAIN)
    assert main(["train", "--config", str(path), "--out", str(tmp_path), "--seed", "5"]) == EXIT_OK
    rows = read_csv_rows((tmp_path / "metrics.csv").read_text())
    assert {r["seed"] for r in rows} == {"5"}


def test_chain_sweep_small(tmp_path, capsys):
    args = ["chain-sweep", "--x", "0.5", "--p-skip", "0.3", "--seeds", "0", "--out", str(tmp_path)]
    assert main(args) == EXIT_OK
    rows = read_csv_rows((tmp_path / "chain_sweep.csv").read_text())
    assert {(r["operator"], r["epochs"]) for r in rows} == {("cumulative", "4"), ("max_det", "2")}
    assert "x=0.5" in capsys.readouterr().out


@pytest.mark.parametrize("operator", ["cumulative", "max_det", "max_extended"])
def test_solve_writes_table(tmp_path, operator):
    assert main(["solve", "--operator", operator, "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / f"{operator}.csv").read_text().startswith("# schema=1")


def test_solve_three_state_cumulative_needs_discount(tmp_path):
    assert main(["solve", "--env", "three_state", "--operator", "cumulative",
                 "--out", str(tmp_path)]) == EXIT_CONFIG


def test_verify_single_suite(capsys, monkeypatch):
    from maxrl import verify

    monkeypatch.setattr(verify, "run_suite", lambda name, seed=0: verify.jensen_suite(3, 2, seed))
    assert main(["verify", "jensen"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("PASS jensen")


def test_unknown_subcommand_is_argparse_error():
    with pytest.raises(SystemExit) as exc:
        main(["fly"])
    assert exc.value.code == 2


def test_parser_lists_all_subcommands():
    text = cli.build_parser().format_help()
    for name in ("counterexample", "chain-sweep", "train", "pg-check", "verify", "solve"):
        assert name in text
