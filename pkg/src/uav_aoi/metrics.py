"""Episode rollouts, evaluation metrics, and the log formats.

Two layers of truth live here. run_episode/evaluate produce per-episode
metric rows and full step-by-step trajectory records. recompute_episode
replays those records from the moves and schedules alone, re-deriving
positions, ages, powers, and rewards from the scenario geometry, so a test
(or a suspicious reader) can check every logged number against physics
without trusting the simulator's own accumulators.

Formats: metrics are CSV with ``# key=value`` provenance comments above the
header; trajectories are JSON lines, first line a header object, then one
object per step with sorted keys.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from . import physics
from .environment import JointAction, Move, RelayGridEnv, apply_move
from .errors import ConfigError
from .fileio import write_text_atomic

TRAJECTORY_FORMAT = "trajectory/1"

Z95 = 1.96  # normal approximation half-width multiplier


@dataclass(frozen=True)
class MetricsRow:
    """Per-episode evaluation metrics."""

    episode: int
    policy: str
    power_weight: float
    reward: float
    length: int
    mean_device_age: float
    mean_weighted_age: float
    mean_device_power: float
    energy: tuple[int, ...]


def run_episode(env: RelayGridEnv, policy, rng, episode: int,
                policy_name: str | None = None):
    """Roll one episode; returns (records, MetricsRow)."""
    state = env.reset()
    start_batteries = [u.battery for u in state.uavs]
    records = []
    reward_sum = 0.0
    age_sum = 0.0
    weighted_age_sum = 0.0
    power_sum = 0.0
    while not env.done:
        cells_start = [list(u.cell) for u in state.uavs]
        index = policy.select_action(env, state, rng)
        action = env.decode_action(index)
        out = env.step(action)
        records.append({
            "episode": episode,
            "t": out.state.t,
            "cells_start": cells_start,
            "cells": [list(u.cell) for u in out.state.uavs],
            "moves": list(action.moves),
            "schedules": list(action.schedules),
            "action_index": index,
            "reward": out.reward,
            "batteries": [u.battery for u in out.state.uavs],
            "aoi": list(out.state.aoi),
            "beta": list(out.state.beta),
            "served": {str(c): u for c, u in out.info["served"].items()},
            "power_sum": out.info["device_power_sum"],
            "weighted_age": out.info["weighted_age"],
            "energy": list(out.info["energy_quanta"]),
            "clamped": list(out.info["clamped"]),
        })
        reward_sum += out.reward
        age_sum += out.info["device_age_mean"]
        weighted_age_sum += out.info["weighted_age"]
        power_sum += out.info["device_power_sum"] / env.n_devices
        state = out.state
    length = len(records)
    row = MetricsRow(
        episode=episode,
        policy=policy_name or getattr(policy, "name", type(policy).__name__),
        power_weight=env.params.power_weight,
        reward=reward_sum,
        length=length,
        mean_device_age=age_sum / length,
        mean_weighted_age=weighted_age_sum / length,
        mean_device_power=power_sum / length,
        energy=tuple(s - u.battery for s, u in zip(start_batteries, state.uavs)),
    )
    return records, row


@dataclass(frozen=True)
class EvalResult:
    rows: tuple[MetricsRow, ...]
    records: tuple[dict, ...]
    summary: dict


def _mean_ci(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, 0.0
    half = Z95 * float(arr.std(ddof=1)) / math.sqrt(arr.size)
    return mean, half


def summarize(rows, policy: str, power_weight: float | None) -> dict:
    """Ergodic metrics: equal-weight mean over per-episode means, with
    normal-approximation 95% half-widths across episodes."""
    if not rows:
        raise ConfigError("no evaluation rows to summarize")
    age, age_ci = _mean_ci([r.mean_device_age for r in rows])
    power, power_ci = _mean_ci([r.mean_device_power for r in rows])
    reward, reward_ci = _mean_ci([r.reward for r in rows])
    return {
        "policy": policy,
        "power_weight": power_weight,
        "n_episodes": len(rows),
        "ergodic_age": age,
        "age_ci": age_ci,
        "ergodic_power": power,
        "power_ci": power_ci,
        "mean_reward": reward,
        "reward_ci": reward_ci,
        "mean_length": float(np.mean([r.length for r in rows])),
    }


def evaluate(env: RelayGridEnv, policy, n_episodes: int, seed,
             policy_name: str | None = None) -> EvalResult:
    """Run ``n_episodes`` fresh episodes under one policy.

    One rng stream (seeded once) drives any stochastic policy across all
    episodes; deterministic policies simply never consume it, so their
    episodes repeat exactly and their confidence intervals collapse to zero.
    """
    if n_episodes < 1:
        raise ConfigError("n_episodes must be >= 1")
    rng = np.random.default_rng(seed)
    name = policy_name or getattr(policy, "name", type(policy).__name__)
    rows, records = [], []
    for episode in range(n_episodes):
        ep_records, row = run_episode(env, policy, rng, episode, policy_name=name)
        rows.append(row)
        records.extend(ep_records)
    summary = summarize(rows, name, env.params.power_weight)
    return EvalResult(rows=tuple(rows), records=tuple(records), summary=summary)


# -------------------------------------------------------------- metrics io

_METRICS_COLUMNS = [
    "episode", "policy", "power_weight", "reward", "length",
    "mean_device_age", "mean_weighted_age", "mean_device_power", "energy_quanta",
]


def write_metrics_csv(path: str, rows, provenance: dict) -> None:
    buf = io.StringIO()
    for key, value in provenance.items():
        buf.write(f"# {key}={value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_METRICS_COLUMNS)
    for r in rows:
        writer.writerow([
            r.episode, r.policy, repr(r.power_weight), repr(r.reward), r.length,
            repr(r.mean_device_age), repr(r.mean_weighted_age),
            repr(r.mean_device_power), ";".join(str(e) for e in r.energy),
        ])
    write_text_atomic(path, buf.getvalue())


def read_metrics_csv(path: str):
    """Returns (rows, provenance). Inverse of write_metrics_csv."""
    provenance = {}
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("# "):
            key, _, value = line[2:].partition("=")
            provenance[key] = value
        elif line:
            body.append(line)
    if not body:
        raise ConfigError(f"{path}: no CSV header")
    reader = csv.reader(body)
    header = next(reader)
    if header != _METRICS_COLUMNS:
        raise ConfigError(f"{path}: unexpected columns {header}")
    for rec in reader:
        rows.append(MetricsRow(
            episode=int(rec[0]), policy=rec[1], power_weight=float(rec[2]),
            reward=float(rec[3]), length=int(rec[4]),
            mean_device_age=float(rec[5]), mean_weighted_age=float(rec[6]),
            mean_device_power=float(rec[7]),
            energy=tuple(int(e) for e in rec[8].split(";")) if rec[8] else (),
        ))
    return rows, provenance


# ----------------------------------------------------------- trajectory io


def write_trajectory(path: str, header: dict, records) -> None:
    head = dict(header)
    head["format"] = TRAJECTORY_FORMAT
    lines = [json.dumps(head, sort_keys=True, separators=(",", ":"))]
    lines.extend(json.dumps(r, sort_keys=True, separators=(",", ":")) for r in records)
    write_text_atomic(path, "\n".join(lines) + "\n")


def read_trajectory(path: str):
    """Returns (header, records)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [line for line in fh.read().splitlines() if line]
    except FileNotFoundError:
        raise ConfigError(f"missing trajectory file: {path}") from None
    if not lines:
        raise ConfigError(f"{path}: empty trajectory file")
    header = json.loads(lines[0])
    if header.get("format") != TRAJECTORY_FORMAT:
        raise ConfigError(f"{path}: not a trajectory file")
    return header, [json.loads(line) for line in lines[1:]]


def records_by_episode(records) -> dict[int, list[dict]]:
    grouped: dict[int, list[dict]] = {}
    for r in records:
        grouped.setdefault(int(r["episode"]), []).append(r)
    for ep, recs in grouped.items():
        recs.sort(key=lambda r: r["t"])
    return grouped


# ------------------------------------------------------------- recompute


def recompute_episode(ep_records, scenario, params, grid) -> dict:
    """Re-derive one episode's metrics from moves/schedules + geometry.

    Trusts only the action stream in the records (and the episode start
    convention: UAVs on their depots, ages at 1). Positions, conflicts,
    powers, ages, and rewards are all recomputed from scratch; the logged
    copies of those quantities are deliberately ignored so this can serve
    as an independent cross-check.
    """
    members_xy = [
        np.array([scenario.devices[i].xy for i in ids], dtype=np.float64)
        for ids in scenario.assignment.members
    ]
    cluster_weight = [
        sum(scenario.devices[i].weight for i in ids)
        for ids in scenario.assignment.members
    ]
    cluster_size = [len(ids) for ids in scenario.assignment.members]
    n_devices = len(scenario.devices)
    n_uavs = len(ep_records[0]["moves"])

    cells = [grid.depots()[u] for u in range(n_uavs)]
    ages = [1] * len(members_xy)
    reward_sum = 0.0
    age_sum = 0.0
    weighted_age_sum = 0.0
    power_sum_total = 0.0

    for record in ep_records:
        schedules = [int(s) for s in record["schedules"]]
        moves = [Move(int(m)) for m in record["moves"]]
        serving: dict[int, int] = {}
        for u, sched in enumerate(schedules):
            if sched != 0 and sched not in serving:
                serving[sched] = u
        power = 0.0
        for sched, u in serving.items():
            ux, uy = grid.cell_xy(cells[u])
            pts = members_xy[sched - 1]
            dist = np.hypot(pts[:, 0] - ux, pts[:, 1] - uy)
            power += float(np.sum(physics.device_tx_power(dist, params)))
        cells = [apply_move(cell, move, grid)[0] for cell, move in zip(cells, moves)]
        ages = [min(a + 1, params.max_age) for a in ages]
        for sched in serving:
            ages[sched - 1] = 1
        weighted_age = sum(w * a for w, a in zip(cluster_weight, ages))
        reward_sum += -weighted_age - params.power_weight / n_devices * power
        weighted_age_sum += weighted_age
        age_sum += sum(n * a for n, a in zip(cluster_size, ages)) / n_devices
        power_sum_total += power / n_devices

    length = len(ep_records)
    return {
        "length": length,
        "reward": reward_sum,
        "mean_device_age": age_sum / length,
        "mean_weighted_age": weighted_age_sum / length,
        "mean_device_power": power_sum_total / length,
    }


def recompute_summary(records, scenario, params, grid, policy: str) -> dict:
    """Ergodic metrics straight from trajectory records (see recompute_episode)."""
    grouped = records_by_episode(records)
    if not grouped:
        raise ConfigError("no trajectory records to recompute")
    episodes = [recompute_episode(grouped[ep], scenario, params, grid)
                for ep in sorted(grouped)]
    rows = [
        MetricsRow(
            episode=ep, policy=policy, power_weight=params.power_weight,
            reward=e["reward"], length=e["length"],
            mean_device_age=e["mean_device_age"],
            mean_weighted_age=e["mean_weighted_age"],
            mean_device_power=e["mean_device_power"], energy=(),
        )
        for ep, e in zip(sorted(grouped), episodes)
    ]
    return summarize(rows, policy, params.power_weight)
