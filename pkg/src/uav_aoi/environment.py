"""Episodic grid-world of UAVs relaying cluster updates to a base station.

The base station sits at the origin cell of an odd-sided square grid;
recharge depots occupy the four corners. Each slot every UAV picks a move
(N/S/E/W/hover) and a cluster to serve (0 = none). Serving a cluster resets
its age and bills the member devices' uplink power into the reward; flying
and relaying drain the UAV battery in integer quanta. Episodes end when any
UAV's battery margin (quanta left after reserving a worst-case trip to the
nearest depot) hits zero, or on the horizon.

Everything here is deterministic: randomness lives in the policies and in
scenario generation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import physics
from .clustering import ClusterAssignment, Device
from .errors import ConfigError
from .params import SystemParams


class Move(IntEnum):
    """Per-slot motion primitive; values are the action encoding."""

    NORTH = 0
    SOUTH = 1
    EAST = 2
    WEST = 3
    HOVER = 4


_DELTAS = {
    Move.NORTH: (0, 1),
    Move.SOUTH: (0, -1),
    Move.EAST: (1, 0),
    Move.WEST: (-1, 0),
    Move.HOVER: (0, 0),
}


@dataclass(frozen=True)
class GridSpec:
    """Square cell grid centered on the base station.

    Cells are indexed by integer offsets from the center, so an 11-cell side
    spans -5..5 on each axis and the corners host the recharge depots.
    """

    cells_per_side: int = 11
    cell_size: float = 100.0

    def __post_init__(self):
        n = self.cells_per_side
        if not (isinstance(n, int) and n >= 3 and n % 2 == 1):
            raise ConfigError(f"cells_per_side must be an odd integer >= 3, got {n!r}")
        if not (isinstance(self.cell_size, (int, float)) and self.cell_size > 0):
            raise ConfigError(f"cell_size must be > 0, got {self.cell_size!r}")

    @property
    def half(self) -> int:
        """Cell index of the grid edge; also the normalization scale."""
        return self.cells_per_side // 2

    @property
    def extent(self) -> float:
        """Meters from the BS to the outermost cell center."""
        return self.half * self.cell_size

    @property
    def area_half_width(self) -> float:
        """Meters from the BS to the edge of the covered area."""
        return self.cells_per_side * self.cell_size / 2.0

    def depots(self) -> tuple[tuple[int, int], ...]:
        h = self.half
        return ((-h, -h), (h, -h), (-h, h), (h, h))

    def contains(self, cell: tuple[int, int]) -> bool:
        return abs(cell[0]) <= self.half and abs(cell[1]) <= self.half

    def cell_xy(self, cell: tuple[int, int]) -> tuple[float, float]:
        """Planar position (m) of a cell center, BS at the origin."""
        return (cell[0] * self.cell_size, cell[1] * self.cell_size)

    def cell_of_xy(self, xy: tuple[float, float]) -> tuple[int, int]:
        """Cell whose center is nearest to a planar position, clipped to the grid."""
        i = int(np.clip(round(xy[0] / self.cell_size), -self.half, self.half))
        j = int(np.clip(round(xy[1] / self.cell_size), -self.half, self.half))
        return (i, j)

    def depot_steps(self, cell: tuple[int, int]) -> int:
        """Manhattan cell count to the nearest depot."""
        return min(abs(cell[0] - dx) + abs(cell[1] - dy) for dx, dy in self.depots())


def apply_move(cell: tuple[int, int], move: Move, grid: GridSpec) -> tuple[tuple[int, int], bool]:
    """Next cell after a move; off-grid attempts stay put and report clamped."""
    dx, dy = _DELTAS[Move(move)]
    target = (cell[0] + dx, cell[1] + dy)
    if grid.contains(target):
        return target, False
    return cell, True


@dataclass(frozen=True)
class UavState:
    """One UAV: grid cell, integer battery quanta, home depot index."""

    cell: tuple[int, int]
    battery: int
    home_depot: int


@dataclass(frozen=True)
class EnvState:
    """Snapshot between slots: UAVs, per-cluster ages, battery margins, time."""

    uavs: tuple[UavState, ...]
    aoi: tuple[int, ...]
    beta: tuple[int, ...]
    t: int


@dataclass(frozen=True)
class JointAction:
    """Decoded joint action: one move and one schedule value per UAV.

    Schedule values are 1-based cluster ids; 0 means serve nobody.
    """

    moves: tuple[int, ...]
    schedules: tuple[int, ...]


@dataclass(frozen=True)
class StepOutcome:
    """Return bundle of step(): next state, reward, done flag, diagnostics."""

    state: EnvState
    reward: float
    done: bool
    info: dict


def action_count(n_uavs: int, n_clusters: int) -> int:
    """Size of the joint action space: (5 * (L + 1))^U."""
    return (5 * (n_clusters + 1)) ** n_uavs


def encode_action(action: JointAction, n_uavs: int, n_clusters: int) -> int:
    """Mixed-radix index of a joint action; UAV 0 is the least significant digit."""
    if len(action.moves) != n_uavs or len(action.schedules) != n_uavs:
        raise ConfigError(f"action has {len(action.moves)} slots, expected {n_uavs}")
    base = 5 * (n_clusters + 1)
    index = 0
    for u in reversed(range(n_uavs)):
        move, sched = action.moves[u], action.schedules[u]
        if not 0 <= move <= 4:
            raise ConfigError(f"uav {u}: move {move} outside 0..4")
        if not 0 <= sched <= n_clusters:
            raise ConfigError(f"uav {u}: schedule {sched} outside 0..{n_clusters}")
        index = index * base + move * (n_clusters + 1) + sched
    return index


def decode_action(index: int, n_uavs: int, n_clusters: int) -> JointAction:
    """Inverse of encode_action."""
    total = action_count(n_uavs, n_clusters)
    if not 0 <= index < total:
        raise ConfigError(f"action index {index} outside 0..{total - 1}")
    base = 5 * (n_clusters + 1)
    moves, schedules = [], []
    rest = index
    for _ in range(n_uavs):
        rest, digit = divmod(rest, base)
        move, sched = divmod(digit, n_clusters + 1)
        moves.append(move)
        schedules.append(sched)
    return JointAction(tuple(moves), tuple(schedules))


class RelayGridEnv:
    """Deterministic episodic simulator of the joint UAV control problem.

    One instance owns one episode at a time: reset() starts it, step()
    advances it, and stepping a finished episode raises. The reward each
    slot is -(weighted age sum after the slot) - (power_weight / n_devices)
    * (sum of device transmit powers billed this slot).
    """

    def __init__(self, grid: GridSpec, devices: list[Device],
                 assignment: ClusterAssignment, params: SystemParams,
                 n_uavs: int = 1, t_max: int = 200,
                 relay_per_device: bool = False):
        params.validate()
        if grid.cell_size != params.cell_size:
            raise ConfigError(
                f"grid cell size {grid.cell_size} != params cell size {params.cell_size}"
            )
        if not 1 <= n_uavs <= len(grid.depots()):
            raise ConfigError(f"n_uavs must be 1..{len(grid.depots())}, got {n_uavs}")
        if t_max < 1:
            raise ConfigError(f"t_max must be >= 1, got {t_max}")
        assignment.validate(len(devices))
        by_id = sorted(devices, key=lambda d: d.id)
        for d in by_id:
            d.validate()

        self.grid = grid
        self.params = params
        self.devices = by_id
        self.assignment = assignment
        self.n_uavs = n_uavs
        self.n_clusters = assignment.n_clusters
        self.n_devices = len(devices)
        self.t_max = t_max
        self.relay_per_device = relay_per_device

        xy = np.array([d.xy for d in by_id], dtype=np.float64)
        w = np.array([d.weight for d in by_id], dtype=np.float64)
        self._member_xy = [xy[list(ids)] for ids in assignment.members]
        self._cluster_weight = np.array([w[list(ids)].sum() for ids in assignment.members])
        self._cluster_size = np.array([len(ids) for ids in assignment.members])

        self._flight_move = physics.flight_energy_quanta(params.cruise_speed, params)
        self._flight_hover = physics.flight_energy_quanta(0.0, params)
        corner = grid.cell_xy((grid.half, grid.half))
        self._relay_reserve = float(physics.relay_energy_quanta(corner, params))
        if self.relay_per_device:
            self._relay_reserve *= int(self._cluster_size.max())

        self._state: EnvState | None = None
        self._done = True

    # ------------------------------------------------------------ state

    @property
    def state(self) -> EnvState:
        if self._state is None:
            raise RuntimeError("environment not reset yet")
        return self._state

    @property
    def done(self) -> bool:
        return self._done

    @property
    def n_actions(self) -> int:
        return action_count(self.n_uavs, self.n_clusters)

    @property
    def encoding_size(self) -> int:
        return 3 * self.n_uavs + self.n_clusters

    def centroid(self, cluster_id: int) -> tuple[float, float]:
        """Centroid position (m) of a 1-based cluster id."""
        return self.assignment.centroids[cluster_id - 1]

    def centroid_cell(self, cluster_id: int) -> tuple[int, int]:
        return self.grid.cell_of_xy(self.centroid(cluster_id))

    def battery_margin(self, uav: UavState) -> int:
        """Quanta left after reserving a worst-case hop-by-hop retreat to the
        nearest depot (cruise flight plus a far-corner relay each hop)."""
        steps = self.grid.depot_steps(uav.cell)
        reserve = math.ceil(steps * (self._flight_move + self._relay_reserve))
        return uav.battery - reserve

    # --------------------------------------------------------- episode

    def reset(self, seed=None) -> EnvState:
        """Start a fresh episode: full batteries, all ages 1, UAVs on depots.

        UAV u starts at depot u (corner order SW, SE, NW, NE). ``seed`` is
        accepted for interface symmetry but unused: the environment itself
        has no randomness.
        """
        depots = self.grid.depots()
        uavs = tuple(
            UavState(cell=depots[u], battery=self.params.battery_quanta, home_depot=u)
            for u in range(self.n_uavs)
        )
        aoi = (1,) * self.n_clusters
        beta = tuple(self.battery_margin(v) for v in uavs)
        self._state = EnvState(uavs=uavs, aoi=aoi, beta=beta, t=0)
        self._done = False
        return self._state

    def step(self, action: JointAction) -> StepOutcome:
        """Advance one slot under a decoded joint action."""
        if self._state is None or self._done:
            raise RuntimeError("step() on a finished or unstarted episode; call reset()")
        if len(action.moves) != self.n_uavs or len(action.schedules) != self.n_uavs:
            raise ConfigError("action arity does not match n_uavs")
        for u in range(self.n_uavs):
            if not 0 <= action.moves[u] <= 4:
                raise ConfigError(f"uav {u}: move {action.moves[u]} outside 0..4")
            if not 0 <= action.schedules[u] <= self.n_clusters:
                raise ConfigError(
                    f"uav {u}: schedule {action.schedules[u]} outside 0..{self.n_clusters}"
                )

        state = self._state
        # conflicts: when several UAVs pick one cluster, the lowest index wins
        serving: dict[int, int] = {}
        for u, sched in enumerate(action.schedules):
            if sched != 0 and sched not in serving:
                serving[sched] = u

        # device uplink power, billed at the serving UAV's slot-start position
        power_sum = 0.0
        for sched, u in serving.items():
            ux, uy = self.grid.cell_xy(state.uavs[u].cell)
            pts = self._member_xy[sched - 1]
            dist = np.hypot(pts[:, 0] - ux, pts[:, 1] - uy)
            power_sum += float(np.sum(physics.device_tx_power(dist, self.params)))

        # motion and battery
        winners = {u: sched for sched, u in serving.items()}
        next_uavs = []
        energy = []
        clamped_flags = []
        for u, uav in enumerate(state.uavs):
            cell, clamped = apply_move(uav.cell, Move(action.moves[u]), self.grid)
            moved = Move(action.moves[u]) != Move.HOVER and not clamped
            flight = self._flight_move if moved else self._flight_hover
            relay = 0.0
            if u in winners:
                xy = self.grid.cell_xy(uav.cell)
                relay = float(physics.relay_energy_quanta(xy, self.params))
                if self.relay_per_device:
                    relay *= int(self._cluster_size[winners[u] - 1])
            battery = physics.battery_step(uav.battery, u in winners, relay, flight)
            energy.append(uav.battery - battery)
            clamped_flags.append(clamped)
            next_uavs.append(UavState(cell=cell, battery=battery, home_depot=uav.home_depot))

        aoi_next = physics.aoi_step(state.aoi, serving.keys(), self.params.max_age)
        weighted_age = float(np.dot(self._cluster_weight, aoi_next))
        reward = -weighted_age - self.params.power_weight / self.n_devices * power_sum

        uavs = tuple(next_uavs)
        beta = tuple(self.battery_margin(v) for v in uavs)
        t_next = state.t + 1
        done = min(beta) <= 0 or t_next >= self.t_max

        next_state = EnvState(uavs=uavs, aoi=tuple(int(a) for a in aoi_next),
                              beta=beta, t=t_next)
        info = {
            "served": dict(sorted(serving.items())),
            "device_power_sum": power_sum,
            "weighted_age": weighted_age,
            "device_age_mean": float(np.dot(self._cluster_size, aoi_next)) / self.n_devices,
            "energy_quanta": tuple(energy),
            "clamped": tuple(clamped_flags),
        }
        self._state = next_state
        self._done = done
        return StepOutcome(state=next_state, reward=reward, done=done, info=info)

    # -------------------------------------------------------- encodings

    def encode_state(self, state: EnvState) -> np.ndarray:
        """Flat float64 features: cells / half-extent, ages / max_age,
        battery margins / full quanta. Length 3U + L."""
        h = float(self.grid.half)
        parts = []
        for uav in state.uavs:
            parts.append(uav.cell[0] / h)
            parts.append(uav.cell[1] / h)
        parts.extend(a / self.params.max_age for a in state.aoi)
        parts.extend(b / self.params.battery_quanta for b in state.beta)
        return np.array(parts, dtype=np.float64)

    def encode_action(self, action: JointAction) -> int:
        return encode_action(action, self.n_uavs, self.n_clusters)

    def decode_action(self, index: int) -> JointAction:
        return decode_action(index, self.n_uavs, self.n_clusters)
