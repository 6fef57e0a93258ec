"""Command-line front end: ``highway-overtake {train,eval,rollout,compare}``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import harness


def _seed_list(text: str) -> list:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="highway-overtake",
                                     description="Highway overtaking with DQN / dueling DQN agents.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-episode progress")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train an agent and write a run directory")
    train.add_argument("--config", help="INI config file (defaults when omitted)")
    train.add_argument("--seed", type=int)
    train.add_argument("--out", default="run")

    ev = sub.add_parser("eval", help="greedy evaluation of saved weights or the reference model")
    ev.add_argument("weights", nargs="?", help="weights file, or 'reference'")
    ev.add_argument("--config")
    ev.add_argument("--episodes", type=int)
    ev.add_argument("--seed", type=int)
    ev.add_argument("--out")

    ro = sub.add_parser("rollout", help="trace one episode tick by tick")
    ro.add_argument("policy", nargs="?", default="reference", help="weights file or 'reference'")
    ro.add_argument("--config")
    ro.add_argument("--seed", type=int)
    ro.add_argument("--trace", default="trace/rollout.jsonl")

    cmp_ = sub.add_parser("compare", help="reference vs DQN vs DDQN over several seeds")
    cmp_.add_argument("--config")
    cmp_.add_argument("--seeds", type=_seed_list, default=[0, 1, 2])
    cmp_.add_argument("--out", default="compare")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; usage problems map to 1 here
        return harness.EXIT_OK if exc.code == 0 else harness.EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    if args.command == "train":
        return harness.cmd_train(args.config, args.seed, args.out)
    if args.command == "eval":
        return harness.cmd_eval(args.weights, args.config, args.episodes, args.seed, args.out)
    if args.command == "rollout":
        return harness.cmd_rollout(args.policy, args.config, args.seed, args.trace)
    return harness.cmd_compare(args.config, args.seeds, args.out)


if __name__ == "__main__":
    sys.exit(main())
