"""Hand-built worlds and scaled-down configs shared by several test modules."""

from pathlib import Path

from uav_aoi.clustering import ClusterAssignment, Device
from uav_aoi.config import ExperimentConfig
from uav_aoi.environment import GridSpec, RelayGridEnv
from uav_aoi.params import SystemParams

DESK_CONFIG = str(Path(__file__).resolve().parents[1] / "configs" / "desk.json")


def micro_config(out_dir, **overrides):
    """Desk config shrunk to seconds: 4 training episodes, 3 eval episodes."""
    data = ExperimentConfig.load(DESK_CONFIG).to_dict()
    data["dqn"].update({"episodes": 4, "warmup": 16, "batch_size": 8,
                        "hidden_sizes": [16, 16], "target_sync": 10})
    data["evaluation"]["episodes"] = 3
    data["output"]["dir"] = str(out_dir)
    for section, patch in overrides.items():
        data[section].update(patch)
    return ExperimentConfig.from_dict(data)


def square_env(params=None, n_uavs=1, t_max=200, cells=11, relay_per_device=False):
    """Fixed 4-device, 2-cluster world: one cluster at the BS cell, one east."""
    params = params or SystemParams()
    grid = GridSpec(cells_per_side=cells, cell_size=params.cell_size)
    devices = [
        Device(0, (0.0, 0.0), 0.25),
        Device(1, (0.0, 100.0), 0.25),
        Device(2, (300.0, 0.0), 0.25),
        Device(3, (300.0, 100.0), 0.25),
    ]
    assignment = ClusterAssignment(
        centroids=((0.0, 50.0), (300.0, 50.0)),
        members=((0, 1), (2, 3)),
        capacity=2,
    )
    return RelayGridEnv(grid, devices, assignment, params, n_uavs=n_uavs,
                        t_max=t_max, relay_per_device=relay_per_device)
