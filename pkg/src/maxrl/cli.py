"""``maxrl`` command line.

Subcommands: counterexample, chain-sweep, train, pg-check, verify, solve.
Exit codes: 0 pass, 1 verification failure, 2 config error, 3 runtime error.
Set ``MAXRL_THREADS`` to cap the BLAS thread pools.
"""

from __future__ import annotations

import os

if "MAXRL_THREADS" in os.environ:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, os.environ["MAXRL_THREADS"])

import argparse
import datetime as _dt
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .agents.train import ConfigError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("maxrl")


RUN_KINDS = ("train", "chain-sweep")


@dataclass
class RunConfig:
    """One experiment: what to run, on which environment, for which seeds."""

    kind: str = "train"
    agent: str = "ppo_max"
    env: dict = field(default_factory=lambda: {"name": "gridworld", "layout": "single_goal",
                                               "reward": {"kind": "dsp", "k": 3}, "t_max": 100})
    hyper: dict = field(default_factory=dict)
    seeds: list = field(default_factory=lambda: [0])
    out: str = "runs/out"
    budget: int = 40_000
    eval_interval: int = 5_000
    eval_episodes: int = 10

    def validate(self) -> list[str]:
        errors = []
        if self.kind not in RUN_KINDS:
            errors.append(f"kind must be one of {RUN_KINDS}, got {self.kind!r}")
        if not self.seeds:
            errors.append("seeds must be non-empty")
        if any(not isinstance(s, int) for s in self.seeds):
            errors.append("seeds must be integers")
        if self.budget <= 0:
            errors.append("budget must be positive")
        if self.eval_interval <= 0 or self.eval_episodes <= 0:
            errors.append("eval_interval and eval_episodes must be positive")
        if not isinstance(self.env, dict):
            errors.append("env must be a mapping")
        else:
            layout = self.env.get("layout")
            if layout is not None and ("/" in str(layout) or str(layout).endswith(".txt")):
                if not Path(layout).exists():
                    errors.append(f"layout file not found: {layout}")
        return errors

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        if not isinstance(d, dict):
            raise ConfigError("config must be a mapping")
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls(**d)
        cfg.seeds = list(cfg.seeds)
        errors = cfg.validate()
        if errors:
            raise ConfigError("; ".join(errors))
        return cfg

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> RunConfig:
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML: {exc}") from exc
        return cls.from_dict(data or {})

    @classmethod
    def load(cls, path: str | Path) -> RunConfig:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        return cls.loads(p.read_text())


def _timestamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    print(f"wrote {path}")


def _seeds(args, default) -> list[int]:
    if getattr(args, "seeds", None):
        return [int(s) for s in args.seeds.split(",")]
    if getattr(args, "seed", None) is not None:
        return [args.seed]
    return list(default)


# -- subcommands -----------------------------------------------------------------

def cmd_counterexample(args) -> int:
    from .experiments import counterexample_report

    rep = counterexample_report()
    for line in rep.lines():
        print(line)
    bad = rep.deviations()
    for msg in bad:
        print(f"DEVIATION {msg}")
    print("FAIL" if bad else "PASS")
    return EXIT_FAIL if bad else EXIT_OK


def cmd_chain_sweep(args) -> int:
    from .experiments import (
        CHAIN_COLUMNS, CHAIN_P_SKIPS, CHAIN_XS, chain_medians, chain_sweep, rows_to_csv,
    )

    xs = [float(v) for v in args.x.split(",")] if args.x else list(CHAIN_XS)
    ps = [float(v) for v in args.p_skip.split(",")] if args.p_skip else list(CHAIN_P_SKIPS)
    seeds = _seeds(args, range(10))
    rows = chain_sweep(xs, ps, seeds)
    _write(Path(args.out) / "chain_sweep.csv", rows_to_csv(rows, CHAIN_COLUMNS, _timestamp()))
    capped = [r for r in rows if r["capped"]]
    for r in capped:
        print(f"CAPPED x={r['x']} p_skip={r['p_skip']} operator={r['operator']} seed={r['seed']}")
    med = chain_medians(rows)
    for x in xs:
        cells = "  ".join(f"p={p}: cum {med[(x, p, 'cumulative')]:g} / max {med[(x, p, 'max_det')]:g}"
                          for p in ps)
        print(f"x={x}: {cells}")
    return EXIT_OK


def _run_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.budget is not None:
        cfg.budget = args.budget
    if args.out is not None:
        cfg.out = args.out
    cfg.seeds = _seeds(args, cfg.seeds)
    errors = cfg.validate()
    if errors:
        raise ConfigError("; ".join(errors))
    return cfg


def cmd_train(args) -> int:
    from .agents.train import METRIC_COLUMNS
    from .experiments import final_success, rows_to_csv, run_training

    cfg = _run_config(args)
    if cfg.kind != "train":
        raise ConfigError(f"config kind is {cfg.kind!r}; use the matching subcommand")
    rows = run_training(cfg.agent, cfg.env, cfg.hyper, cfg.seeds, cfg.budget,
                        cfg.eval_interval, cfg.eval_episodes)
    out = Path(cfg.out)
    _write(out / "metrics.csv", rows_to_csv(rows, METRIC_COLUMNS, _timestamp()))
    _write(out / "config.yaml", cfg.dumps())
    for seed, s in final_success(rows).items():
        print(f"seed {seed}: final success {s:.3f}")
    return EXIT_OK


def cmd_pg_check(args) -> int:
    from .pg_check import run_deterministic_check, run_stochastic_check

    seed = args.seed if args.seed is not None else 0
    results = [
        run_stochastic_check(seed=seed),
        run_stochastic_check(seed=seed, scale=8.0),
        run_deterministic_check(seed=seed),
    ]
    labels = ["stochastic", "stochastic (near-deterministic softmax)", "deterministic"]
    ok = True
    for label, r in zip(labels, results):
        status = "PASS" if r.passed else "FAIL"
        ok &= r.passed
        print(f"{status} {label}: min cosine {min(r.cosines):.6f} over {len(r.cosines)} draws "
              f"(threshold {r.threshold})")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify(args) -> int:
    from .verify import SUITES, run_suite

    names = SUITES if args.suite == "all" else (args.suite,)
    seed = args.seed if args.seed is not None else 0
    ok = True
    for name in names:
        r = run_suite(name, seed=seed)
        ok &= r.passed
        print(r.summary())
        for case_seed, msg in r.failures:
            print(f"  seed={case_seed} {msg}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_solve(args) -> int:
    from .environments import ChainConfig, build_chain, build_three_state
    from .mdp import MdpSpec
    from .solvers import solve_cumulative, solve_extended, solve_maxdet, write_table_csv

    if args.mdp:
        mdp = MdpSpec.load(args.mdp)
    elif args.env == "chain":
        mdp = build_chain(ChainConfig())
    else:
        mdp = build_three_state()[0]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.operator == "max_extended":
        table, res = solve_extended(mdp, mode=args.mode)
    elif args.operator == "max_det":
        table, res = solve_maxdet(mdp)
    else:
        if mdp.gamma >= 1.0:
            raise ConfigError("the cumulative operator needs gamma < 1")
        table, res = solve_cumulative(mdp)
    path = out / f"{args.operator}.csv"
    write_table_csv(table, path)
    print(f"wrote {path} ({len(res)} sweeps, final residual {res[-1]:.3g})")
    return EXIT_OK


# -- entry point -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maxrl", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, *, config=False, budget=False):
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--seeds", default=None, help="comma-separated seed list")
        sp.add_argument("--out", default=None)
        if config:
            sp.add_argument("--config", default=None, help="YAML run config")
        if budget:
            sp.add_argument("--budget", type=int, default=None, help="environment steps per seed")

    sp = sub.add_parser("counterexample", help="three-state counterexample values")
    sp.set_defaults(func=cmd_counterexample)

    sp = sub.add_parser("chain-sweep", help="epochs-to-optimal on the chain MDP")
    common(sp)
    sp.add_argument("--x", default=None, help="comma-separated intermediate rewards")
    sp.add_argument("--p-skip", default=None, help="comma-separated skip probabilities")
    sp.set_defaults(func=cmd_chain_sweep, out_default="runs/chain")

    sp = sub.add_parser("train", help="train an agent from a run config")
    common(sp, config=True, budget=True)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("pg-check", help="policy-gradient formulas against finite differences")
    common(sp)
    sp.set_defaults(func=cmd_pg_check)

    sp = sub.add_parser("verify", help="operator property suites")
    common(sp)
    sp.add_argument("suite", nargs="?", default="all",
                    choices=("all", "contraction", "fixedpoint", "jensen", "recovery"))
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("solve", help="dump a fixed-point table as CSV")
    common(sp)
    sp.add_argument("--env", choices=("chain", "three_state"), default="chain")
    sp.add_argument("--mdp", default=None, help="MDP file to solve instead of a built-in one")
    sp.add_argument("--operator", choices=("cumulative", "max_det", "max_extended"),
                    default="max_extended")
    sp.add_argument("--mode", choices=("exact", "grid"), default="exact")
    sp.set_defaults(func=cmd_solve, out_default="runs/solve")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "out", "") is None and hasattr(args, "out_default"):
        args.out = args.out_default
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report and map to the runtime exit code
        log.debug("runtime error", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
