"""Command-line interface.

Subcommands mirror the experiment pipeline: generate a scenario, re-cluster
it, train the learner, evaluate any policy, run a whole trade-off sweep, or
re-render plots from existing logs. Exit codes: 0 success, 1 configuration
or input problems, 2 runtime failures.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import ExperimentConfig
from .errors import ConfigError
from .metrics import read_trajectory  # noqa: F401  (re-exported for scripting)
from .network import load_checkpoint
from .plots import emit_plots, weight_tag
from .policies import BASELINES, DqnAgent
from .scenario import load_scenario, recluster, save_scenario
from .sweep import ensure_scenario, evaluate_policy, run_sweep, train_dqn


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as ConfigError (exit code 1)."""

    def error(self, message):
        raise ConfigError(message)


def _parse_weights(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(part) for part in text.split(",") if part.strip() != "")
    except ValueError:
        raise ConfigError(f"--weight expects comma-separated numbers, got {text!r}") from None
    if not values:
        raise ConfigError("--weight expects at least one number")
    return values


def _load_config(args) -> ExperimentConfig:
    config = ExperimentConfig.load(args.config)
    if getattr(args, "out", None):
        config = ExperimentConfig.from_dict(
            {**config.to_dict(), "output": {"dir": args.out}}
        )
    return config


def cmd_generate(args) -> int:
    config = _load_config(args)
    scenario = ensure_scenario(config, config.output_dir, seed=args.seed)
    path = os.path.join(config.output_dir, "scenario.json")
    print(f"scenario: {scenario.n_devices} devices in {scenario.n_clusters} clusters "
          f"(capacity {scenario.assignment.capacity}) -> {path}")
    return 0


def cmd_cluster(args) -> int:
    config = _load_config(args)
    path = os.path.join(config.output_dir, "scenario.json")
    scenario = load_scenario(path)
    seed = config.seed_scenario if args.seed is None else args.seed
    scenario = recluster(scenario, config, seed=seed)
    save_scenario(path, scenario)
    print(f"reclustered: {scenario.n_clusters} clusters "
          f"(capacity {scenario.assignment.capacity}) -> {path}")
    return 0


def cmd_train(args) -> int:
    config = _load_config(args)
    if args.policy != "dqn":
        raise ConfigError(f"policy {args.policy!r} has nothing to train")
    weights = _parse_weights(args.weight) if args.weight else config.power_weights
    scenario = ensure_scenario(config, config.output_dir)
    for weight in weights:
        agent = train_dqn(config, scenario, weight, config.output_dir,
                          episodes=args.episodes, seed=args.seed)
        last = agent.history_[-1]
        print(f"trained dqn at weight {weight:g}: {len(agent.history_)} episodes, "
              f"final reward {last['reward']:.3f} -> "
              f"{config.output_dir}/checkpoints/dqn_w{weight_tag(weight)}.npz")
    return 0


def cmd_eval(args) -> int:
    config = _load_config(args)
    weight = args.weight_value if args.weight_value is not None else config.power_weights[0]
    scenario = ensure_scenario(config, config.output_dir)
    if args.policy == "dqn":
        ck_path = os.path.join(config.output_dir, "checkpoints",
                               f"dqn_w{weight_tag(weight)}.npz")
        if not os.path.exists(ck_path):
            raise ConfigError(f"no checkpoint at {ck_path}; run train first")
        net, _, meta = load_checkpoint(ck_path)
        if meta.get("config_hash") not in (None, config.config_hash()):
            raise ConfigError(f"{ck_path} was trained under a different config")
        policy = DqnAgent()
        policy.network_ = net
        policy.n_actions_ = net.layer_sizes[-1]
    elif args.policy in BASELINES:
        policy = BASELINES[args.policy]()
    else:
        raise ConfigError(
            f"unknown policy {args.policy!r}; pick one of dqn, {', '.join(sorted(BASELINES))}"
        )
    result = evaluate_policy(config, scenario, policy, args.policy, weight,
                             config.output_dir, episodes=args.episodes,
                             seed=args.seed)
    s = result.summary
    print(f"{args.policy} at weight {weight:g}: "
          f"age {s['ergodic_age']:.3f} +- {s['age_ci']:.3f}, "
          f"power {s['ergodic_power']:.3e} +- {s['power_ci']:.3e} W, "
          f"reward {s['mean_reward']:.3f} +- {s['reward_ci']:.3f} "
          f"({s['n_episodes']} episodes)")
    return 0


def cmd_sweep(args) -> int:
    config = _load_config(args)
    weights = _parse_weights(args.weight) if args.weight else None
    rows = run_sweep(config, weights=weights, episodes=args.episodes)
    print(f"sweep finished: {len(rows)} rows -> {config.output_dir}/sweep.csv")
    return 0


def cmd_plot(args) -> int:
    config = _load_config(args)
    written = emit_plots(config, config.output_dir)
    for path in written:
        print(path)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="uav-aoi",
                     description="UAV relay simulator, learner, and experiment harness")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed_help):
        p.add_argument("--config", required=True, help="experiment JSON file")
        p.add_argument("--out", help="run directory (default: output.dir from the config)")
        p.add_argument("--seed", type=int, help=seed_help)

    p = sub.add_parser("generate", help="draw device positions and cluster them")
    common(p, "override seeds.scenario")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("cluster", help="re-cluster an existing scenario")
    common(p, "clustering seed (default seeds.scenario)")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("train", help="train the learner (one run per weight)")
    common(p, "override seeds.training")
    p.add_argument("--policy", default="dqn", help="only dqn trains")
    p.add_argument("--weight", help="comma-separated trade-off weights "
                                    "(default: reward.power_weight)")
    p.add_argument("--episodes", type=int, help="override dqn.episodes")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a policy from fresh rollouts")
    common(p, "override seeds.evaluation")
    p.add_argument("--policy", required=True, help="dqn, ga, nn, or rw")
    p.add_argument("--weight", dest="weight_value", type=float,
                   help="trade-off weight (default: first of reward.power_weight)")
    p.add_argument("--episodes", type=int, help="override evaluation.episodes")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="full pipeline across the weight grid")
    common(p, "unused; sweeps take seeds from the config")
    p.add_argument("--weight", help="comma-separated weights (default: config grid)")
    p.add_argument("--episodes", type=int, help="override dqn.episodes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="re-render plots from existing logs")
    common(p, "unused")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure, distinct from bad input
        print(f"failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
