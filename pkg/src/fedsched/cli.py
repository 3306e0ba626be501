"""Command-line entry point: ``fedsched {train,run,bench}``."""
from __future__ import annotations

import argparse
import contextlib
import logging
import sys
from pathlib import Path

from .core import ConfigError, load_config
from .harness import bench, make_scheduler, run_episode, train_agent, write_episode
from .scheduler.baselines import KINDS

SCHEDULERS = ("ppo", *KINDS)


def _float_list(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _sched_list(text):
    names = [x.strip() for x in text.split(",") if x.strip()]
    bad = [n for n in names if n not in SCHEDULERS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown scheduler(s) {bad}; choose from {SCHEDULERS}")
    return names


def build_parser():
    p = argparse.ArgumentParser(prog="fedsched", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON config file")
    common.add_argument("--alloc", choices=("ldra", "lcra"), default="lcra",
                        help="per-round resource allocation solver")
    common.add_argument("--debug-alloc", action="store_true",
                        help="write every round's allocation as JSON lines to <out>/alloc.jsonl")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", parents=[common], help="train the PPO scheduler")
    t.add_argument("--episodes", type=int, required=True)
    t.add_argument("--out", required=True, help="output directory")

    r = sub.add_parser("run", parents=[common], help="run one episode with a scheduler")
    r.add_argument("--scheduler", choices=SCHEDULERS, required=True)
    r.add_argument("--snapshot", help="trained PPO snapshot directory (required for ppo)")
    r.add_argument("--seed", type=int, help="episode seed (default: rng_seed from config)")
    r.add_argument("--out", default=".", help="output directory for rounds.csv")

    b = sub.add_parser("bench", parents=[common], help="compare schedulers over seeds")
    b.add_argument("--schedulers", type=_sched_list, required=True, help="comma-separated names")
    b.add_argument("--seeds", type=int, required=True, help="number of seeds")
    sweep = b.add_mutually_exclusive_group()
    sweep.add_argument("--sweep-a", type=_float_list, help="comma-separated non-IID ratios")
    sweep.add_argument("--sweep-target", type=_float_list, help="comma-separated target accuracies")
    b.add_argument("--snapshot", help="trained PPO snapshot directory")
    b.add_argument("--out", required=True, help="output directory")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "train":
            _, curve = train_agent(cfg, args.episodes, out, alloc=args.alloc)
            best = max(c[1] for c in curve)
            print(f"trained {len(curve)} episodes; best return {best:.4f}; snapshot in {out / 'snapshot'}")
        elif args.command == "run":
            sched = make_scheduler(args.scheduler, args.snapshot)
            seed = cfg.rng_seed if args.seed is None else args.seed
            with _dump(args, out) as dump:
                res = run_episode(cfg, sched, seed, tag="bench", alloc=args.alloc, alloc_dump=dump)
            write_episode(res, out / "rounds.csv")
            print(f"{args.scheduler}: rounds={res.rounds_used} wallclock_s={res.total_wallclock_s:.6f} "
                  f"reached={res.reached_target} final_accuracy={res.final_accuracy:.4f}")
        else:
            seeds = range(cfg.rng_seed, cfg.rng_seed + args.seeds)
            _, medians, _ = bench(cfg, args.schedulers, seeds, sweep_a=args.sweep_a,
                                  sweep_target=args.sweep_target, snapshot=args.snapshot,
                                  alloc=args.alloc, out_dir=out)
            for name, med in medians.items():
                print(f"{name}: median wallclock_s={med:.6f}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1
    return 0


@contextlib.contextmanager
def _dump(args, out):
    if not args.debug_alloc:
        yield None
        return
    with open(out / "alloc.jsonl", "w") as fh:
        yield fh


if __name__ == "__main__":
    sys.exit(main())
