"""Experiment orchestration: scenario, training runs, evaluations, sweep table.

A sweep trains one DQN per trade-off weight on a shared scenario, evaluates
it and the three heuristic baselines, and writes every artifact under one
run directory:

    scenario.json
    checkpoints/dqn_w<tag>.npz
    train/dqn_w<tag>.csv
    eval/<policy>[_w<tag>].{csv,jsonl}
    sweep.csv
    plots/*.{csv,svg}

Baselines ignore the reward weight, so they are evaluated once (at the
first weight of the grid) and reused for every sweep row.
"""

from __future__ import annotations

import csv
import io
import os

from .config import ExperimentConfig
from .errors import ConfigError
from .fileio import write_text_atomic
from .metrics import EvalResult, evaluate, write_metrics_csv, write_trajectory
from .network import save_checkpoint
from .plots import emit_plots, weight_tag
from .policies import BASELINES, DqnAgent
from .scenario import Scenario, build_env, generate_scenario, load_scenario, save_scenario

SWEEP_COLUMNS = [
    "policy", "power_weight", "n_uavs", "n_devices", "n_clusters", "n_episodes",
    "ergodic_age", "age_ci", "ergodic_power", "power_ci",
    "mean_reward", "reward_ci",
]


def ensure_scenario(config: ExperimentConfig, run_dir: str,
                    seed: int | None = None) -> Scenario:
    """Load the run's scenario, generating and saving it on first use."""
    path = os.path.join(run_dir, "scenario.json")
    if os.path.exists(path) and seed is None:
        scenario = load_scenario(path)
        if scenario.config_hash != config.config_hash():
            raise ConfigError(
                f"{path} was generated from a different config "
                f"(hash {scenario.config_hash}, expected {config.config_hash()})"
            )
        return scenario
    scenario = generate_scenario(config, seed=seed)
    save_scenario(path, scenario)
    return scenario


def _provenance(config: ExperimentConfig, policy: str, weight: float | None) -> dict:
    return {
        "config_hash": config.config_hash(),
        "policy": policy,
        "power_weight": "" if weight is None else repr(weight),
        "seeds": f"scenario={config.seed_scenario} training={config.seed_training} "
                 f"evaluation={config.seed_evaluation}",
    }


def train_dqn(config: ExperimentConfig, scenario: Scenario, weight: float,
              run_dir: str, episodes: int | None = None,
              seed: int | None = None) -> DqnAgent:
    """Train one agent at one trade-off weight; writes checkpoint + history CSV."""
    env = build_env(config, scenario, power_weight=weight)
    seed = config.seed_training if seed is None else seed
    kwargs = config.dqn.agent_kwargs()
    if episodes is not None:
        kwargs["episodes"] = episodes
    agent = DqnAgent(random_state=seed, **kwargs)
    agent.fit(env)

    tag = weight_tag(weight)
    save_checkpoint(
        os.path.join(run_dir, "checkpoints", f"dqn_w{tag}.npz"),
        agent.network_, agent.adam_,
        meta={
            "config_hash": config.config_hash(),
            "power_weight": repr(weight),
            "seed_scenario": str(config.seed_scenario),
            "seed_training": str(seed),
        },
    )
    buf = io.StringIO()
    for key, value in _provenance(config, "dqn", weight).items():
        buf.write(f"# {key}={value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    columns = ["episode", "reward", "length", "mean_device_age",
               "mean_device_power", "epsilon", "mean_loss"]
    writer.writerow(columns)
    for row in agent.history_:
        writer.writerow([row["episode"], repr(row["reward"]), row["length"],
                         repr(row["mean_device_age"]), repr(row["mean_device_power"]),
                         repr(row["epsilon"]), repr(row["mean_loss"])])
    write_text_atomic(os.path.join(run_dir, "train", f"dqn_w{tag}.csv"), buf.getvalue())
    return agent


def evaluate_policy(config: ExperimentConfig, scenario: Scenario, policy,
                    policy_name: str, weight: float, run_dir: str,
                    episodes: int | None = None, seed: int | None = None,
                    swept: bool = True) -> EvalResult:
    """Evaluate one policy at one weight; writes metrics CSV + trajectory JSONL."""
    env = build_env(config, scenario, power_weight=weight)
    n_episodes = config.eval_episodes if episodes is None else episodes
    seed = config.seed_evaluation if seed is None else seed
    result = evaluate(env, policy, n_episodes, seed, policy_name=policy_name)

    stem = policy_name + (f"_w{weight_tag(weight)}" if swept else "")
    header = {
        "config_hash": config.config_hash(),
        "policy": policy_name,
        "power_weight": weight,
        "swept": swept,
        "n_uavs": config.n_uavs,
        "episodes": n_episodes,
        "seeds": {
            "scenario": config.seed_scenario,
            "training": config.seed_training,
            "evaluation": seed,
        },
    }
    write_trajectory(os.path.join(run_dir, "eval", stem + ".jsonl"),
                     header, result.records)
    write_metrics_csv(os.path.join(run_dir, "eval", stem + ".csv"), result.rows,
                      _provenance(config, policy_name, weight))
    return result


def write_sweep_csv(path: str, rows, config: ExperimentConfig) -> None:
    buf = io.StringIO()
    buf.write(f"# config_hash={config.config_hash()}\n")
    buf.write(
        f"# seeds=scenario={config.seed_scenario} training={config.seed_training} "
        f"evaluation={config.seed_evaluation}\n"
    )
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for r in rows:
        writer.writerow(r)
    write_text_atomic(path, buf.getvalue())


def run_sweep(config: ExperimentConfig, run_dir: str | None = None,
              weights: tuple[float, ...] | None = None,
              episodes: int | None = None) -> list[list]:
    """Full pipeline: scenario, baselines once, one DQN per weight, plots.

    Returns the sweep table rows (also written to sweep.csv).
    """
    run_dir = config.output_dir if run_dir is None else run_dir
    weights = config.power_weights if weights is None else weights
    scenario = ensure_scenario(config, run_dir)

    def sweep_row(summary: dict, weight) -> list:
        return [
            summary["policy"], "" if weight is None else repr(weight),
            config.n_uavs, scenario.n_devices, scenario.n_clusters,
            summary["n_episodes"],
            repr(summary["ergodic_age"]), repr(summary["age_ci"]),
            repr(summary["ergodic_power"]), repr(summary["power_ci"]),
            repr(summary["mean_reward"]), repr(summary["reward_ci"]),
        ]

    rows = []
    for name in sorted(BASELINES):
        policy = BASELINES[name]()
        result = evaluate_policy(config, scenario, policy, name, weights[0],
                                 run_dir, swept=False)
        rows.append(sweep_row(result.summary, None))

    for weight in weights:
        agent = train_dqn(config, scenario, weight, run_dir, episodes=episodes)
        result = evaluate_policy(config, scenario, agent, "dqn", weight, run_dir)
        rows.append(sweep_row(result.summary, weight))

    write_sweep_csv(os.path.join(run_dir, "sweep.csv"), rows, config)
    emit_plots(config, run_dir)
    return rows
