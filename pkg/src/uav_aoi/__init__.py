"""Simulator and learners for multi-UAV relaying of IoT status updates.

A fleet of battery-limited UAVs moves over a square grid of cells, picks up
status updates from clustered ground devices, and relays them to a central
base station. Policies trade the freshness of those updates (age of
information) against device transmit power. The package provides the
closed-form physics, capacity-bounded clustering, the episodic grid
environment, a from-scratch numpy deep Q-learner, heuristic baselines, and a
reproducible experiment harness with a CLI.
"""

from .clustering import CapacitatedKMeans, ClusterAssignment, Device, cluster_capacity
from .config import DqnSettings, ExperimentConfig
from .environment import (
    EnvState,
    GridSpec,
    JointAction,
    Move,
    RelayGridEnv,
    StepOutcome,
    UavState,
)
from .errors import ConfigError, InfeasibleRateError
from .metrics import MetricsRow, evaluate, run_episode
from .network import AdamState, Minibatch, Mlp, load_checkpoint, save_checkpoint
from .params import PropulsionParams, SystemParams, db_to_linear, dbm_to_watts
from .policies import (
    BASELINES,
    DqnAgent,
    EpsilonSchedule,
    GreedyAgePolicy,
    NearestClusterPolicy,
    RandomWalkPolicy,
    ReplayBuffer,
)
from .scenario import Scenario, build_env, generate_scenario, load_scenario, save_scenario
from .sweep import run_sweep

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "BASELINES",
    "CapacitatedKMeans",
    "ClusterAssignment",
    "ConfigError",
    "Device",
    "DqnAgent",
    "DqnSettings",
    "EnvState",
    "EpsilonSchedule",
    "ExperimentConfig",
    "GreedyAgePolicy",
    "GridSpec",
    "InfeasibleRateError",
    "JointAction",
    "MetricsRow",
    "Minibatch",
    "Mlp",
    "Move",
    "NearestClusterPolicy",
    "PropulsionParams",
    "RandomWalkPolicy",
    "RelayGridEnv",
    "ReplayBuffer",
    "Scenario",
    "StepOutcome",
    "SystemParams",
    "UavState",
    "build_env",
    "cluster_capacity",
    "db_to_linear",
    "dbm_to_watts",
    "evaluate",
    "generate_scenario",
    "load_checkpoint",
    "load_scenario",
    "run_episode",
    "run_sweep",
    "save_checkpoint",
    "save_scenario",
    "__version__",
]
