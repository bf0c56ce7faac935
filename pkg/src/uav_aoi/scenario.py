"""Scenario generation and persistence.

A scenario is everything random that happens before an episode: device
positions drawn uniformly over the covered area, their weights, and the
capacity-bounded clustering. It is generated once per experiment, written
to scenario.json, and every later stage loads the same file, so training
and evaluation always agree on the world.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .clustering import ClusterAssignment, Device, cluster_capacity, kmeans_capacitated
from .config import ExperimentConfig
from .environment import RelayGridEnv
from .errors import ConfigError
from .fileio import read_json, write_text_atomic

_FORMAT = "scenario/1"


@dataclass(frozen=True)
class Scenario:
    """Frozen world: devices, their clustering, and provenance."""

    devices: tuple[Device, ...]
    assignment: ClusterAssignment
    seed: int
    config_hash: str

    @property
    def n_devices(self) -> int:
        return len(self.devices)

    @property
    def n_clusters(self) -> int:
        return self.assignment.n_clusters


def generate_scenario(config: ExperimentConfig, seed: int | None = None) -> Scenario:
    """Draw device positions and cluster them; deterministic per seed."""
    seed = config.seed_scenario if seed is None else seed
    placement_seq, cluster_seq = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(placement_seq)

    half_width = config.grid_cells * config.cell_size / 2.0
    xy = rng.uniform(-half_width, half_width, size=(config.n_devices, 2))
    weights = config.weights_vector()
    devices = tuple(
        Device(id=i, xy=(float(x), float(y)), weight=float(w))
        for i, ((x, y), w) in enumerate(zip(xy, weights))
    )

    capacity = cluster_capacity(config.system_params())
    assignment = kmeans_capacitated(
        list(devices), capacity, seed=np.random.default_rng(cluster_seq)
    )
    return Scenario(devices=devices, assignment=assignment, seed=seed,
                    config_hash=config.config_hash())


def recluster(scenario: Scenario, config: ExperimentConfig, seed: int) -> Scenario:
    """Re-run clustering on existing device positions with a new seed."""
    capacity = cluster_capacity(config.system_params())
    assignment = kmeans_capacitated(list(scenario.devices), capacity, seed=seed)
    return Scenario(devices=scenario.devices, assignment=assignment,
                    seed=scenario.seed, config_hash=scenario.config_hash)


def save_scenario(path: str, scenario: Scenario) -> None:
    data = {
        "format": _FORMAT,
        "config_hash": scenario.config_hash,
        "seed": scenario.seed,
        "devices": [
            {"id": d.id, "x": d.xy[0], "y": d.xy[1], "weight": d.weight}
            for d in scenario.devices
        ],
        "clusters": scenario.assignment.to_dict(),
    }
    write_text_atomic(path, json.dumps(data, indent=2) + "\n")


def load_scenario(path: str) -> Scenario:
    data = read_json(path)
    if data.get("format") != _FORMAT:
        raise ConfigError(f"{path}: not a scenario file (format {data.get('format')!r})")
    devices = tuple(
        Device(id=int(d["id"]), xy=(float(d["x"]), float(d["y"])), weight=float(d["weight"]))
        for d in data["devices"]
    )
    assignment = ClusterAssignment.from_dict(data["clusters"])
    assignment.validate(len(devices))
    return Scenario(devices=devices, assignment=assignment,
                    seed=int(data["seed"]), config_hash=str(data["config_hash"]))


def build_env(config: ExperimentConfig, scenario: Scenario,
              power_weight: float | None = None) -> RelayGridEnv:
    """Assemble the environment for one (scenario, trade-off weight) pair."""
    return RelayGridEnv(
        grid=config.grid(),
        devices=list(scenario.devices),
        assignment=scenario.assignment,
        params=config.system_params(power_weight),
        n_uavs=config.n_uavs,
        t_max=config.t_max,
        relay_per_device=config.relay_per_device,
    )
