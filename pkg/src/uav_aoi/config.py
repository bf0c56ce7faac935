"""Experiment configuration: one JSON file drives scenario, training, and
evaluation.

Parsing is strict: unknown keys anywhere are errors (with the offending
dotted path), types are checked field by field, and to_dict/from_dict
round-trip exactly. The config hash stamped into every output file is a
sha256 prefix over the canonical JSON form.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .clustering import cluster_capacity
from .environment import GridSpec
from .errors import ConfigError
from .fileio import read_json, write_text_atomic
from .params import PropulsionParams, SystemParams, db_to_linear, dbm_to_watts


def _number(section: str, key: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key}: expected a number, got {value!r}")
    return float(value)


def _integer(section: str, key: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{section}.{key}: expected an integer, got {value!r}")
    return value


def _boolean(section: str, key: str, value) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"{section}.{key}: expected true/false, got {value!r}")
    return value


class _Section:
    """One JSON object level: typed reads, defaults, unknown-key detection."""

    def __init__(self, name: str, data: dict | None):
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(f"{name}: expected an object")
        self.name = name
        self.data = data
        self.seen: set[str] = set()

    def _get(self, key, default):
        self.seen.add(key)
        if key not in self.data:
            if default is _REQUIRED:
                raise ConfigError(f"missing required key {self.name}.{key}")
            return None
        return self.data[key]

    def number(self, key, default=None):
        raw = self._get(key, default)
        return default if raw is None else _number(self.name, key, raw)

    def integer(self, key, default=None):
        raw = self._get(key, default)
        return default if raw is None else _integer(self.name, key, raw)

    def boolean(self, key, default=None):
        raw = self._get(key, default)
        return default if raw is None else _boolean(self.name, key, raw)

    def string(self, key, default=None):
        raw = self._get(key, default)
        if raw is None:
            return default
        if not isinstance(raw, str):
            raise ConfigError(f"{self.name}.{key}: expected a string, got {raw!r}")
        return raw

    def raw(self, key, default=None):
        value = self._get(key, default)
        return default if value is None else value

    def subsection(self, key) -> "_Section":
        self.seen.add(key)
        return _Section(f"{self.name}.{key}", self.data.get(key))

    def finish(self) -> None:
        unknown = set(self.data) - self.seen
        if unknown:
            path = f"{self.name}.{sorted(unknown)[0]}"
            raise ConfigError(f"unknown key {path}")


class _Required:
    pass


_REQUIRED = _Required()


@dataclass(frozen=True)
class DqnSettings:
    """Training hyperparameters, mirroring DqnAgent's constructor."""

    episodes: int = 3000
    gamma: float = 0.99
    learning_rate: float = 1e-4
    batch_size: int = 64
    buffer_capacity: int = 100_000
    warmup: int = 1000
    target_sync: int = 1000
    epsilon_start: float = 1.0
    epsilon_floor: float = 0.05
    epsilon_decay_fraction: float = 0.5
    hidden_sizes: tuple[int, ...] = (64, 128, 256, 128, 128)
    huber_delta: float | None = None
    grad_clip: float | None = None

    def agent_kwargs(self) -> dict:
        return {
            "episodes": self.episodes,
            "gamma": self.gamma,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "buffer_capacity": self.buffer_capacity,
            "warmup": self.warmup,
            "target_sync": self.target_sync,
            "epsilon_start": self.epsilon_start,
            "epsilon_floor": self.epsilon_floor,
            "epsilon_decay_fraction": self.epsilon_decay_fraction,
            "hidden_sizes": self.hidden_sizes,
            "huber_delta": self.huber_delta,
            "grad_clip": self.grad_clip,
        }


@dataclass(frozen=True)
class ExperimentConfig:
    """Full experiment description, flattened from the JSON sections."""

    grid_cells: int = 11
    cell_size: float = 100.0
    n_devices: int = 100
    device_weights: tuple[float, ...] | None = None  # None = uniform 1/K
    n_uavs: int = 2
    uav_altitude: float = 100.0
    cruise_speed: float = 25.0
    battery_capacity: float = 10000.0
    battery_quanta: int = 200
    propulsion: PropulsionParams = field(default_factory=PropulsionParams)
    ref_gain_db: float = 30.0
    bandwidth: float = 1e6
    packet_bits: float = 5e6
    noise_dbm: float = -100.0
    uplink_rate: float = 25e6
    bs_height: float = 15.0
    max_age: int = 30
    power_weights: tuple[float, ...] = (0.0,)
    t_max: int = 200
    relay_per_device: bool = False
    dqn: DqnSettings = field(default_factory=DqnSettings)
    eval_episodes: int = 50
    seed_scenario: int = 1
    seed_training: int = 1
    seed_evaluation: int = 1
    output_dir: str = "runs/default"

    # ------------------------------------------------------------ parse

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        root = _Section("config", data)
        defaults = cls()

        grid = root.subsection("grid")
        grid_cells = grid.integer("cells_per_side", defaults.grid_cells)
        cell_size = grid.number("cell_size_m", defaults.cell_size)
        grid.finish()

        devices = root.subsection("devices")
        n_devices = devices.integer("count", defaults.n_devices)
        weights_raw = devices.raw("weights", "uniform")
        if weights_raw == "uniform" or weights_raw is None:
            device_weights = None
        elif isinstance(weights_raw, list):
            device_weights = tuple(
                _number("devices", f"weights[{i}]", w) for i, w in enumerate(weights_raw)
            )
        else:
            raise ConfigError(
                f"devices.weights: expected \"uniform\" or a list, got {weights_raw!r}"
            )
        devices.finish()

        uavs = root.subsection("uavs")
        n_uavs = uavs.integer("count", defaults.n_uavs)
        uav_altitude = uavs.number("altitude_m", defaults.uav_altitude)
        cruise_speed = uavs.number("cruise_speed_ms", defaults.cruise_speed)
        battery_capacity = uavs.number("battery_capacity_j", defaults.battery_capacity)
        battery_quanta = uavs.integer("battery_quanta", defaults.battery_quanta)
        prop_sec = uavs.subsection("propulsion")
        dp = defaults.propulsion
        propulsion = PropulsionParams(
            profile_power=prop_sec.number("profile_power_w", dp.profile_power),
            induced_power=prop_sec.number("induced_power_w", dp.induced_power),
            tip_speed=prop_sec.number("tip_speed_ms", dp.tip_speed),
            hover_induced_speed=prop_sec.number("hover_induced_speed_ms", dp.hover_induced_speed),
            drag_ratio=prop_sec.number("drag_ratio", dp.drag_ratio),
            air_density=prop_sec.number("air_density", dp.air_density),
            rotor_solidity=prop_sec.number("rotor_solidity", dp.rotor_solidity),
            disk_area=prop_sec.number("disk_area", dp.disk_area),
        )
        prop_sec.finish()
        uavs.finish()

        radio = root.subsection("radio")
        ref_gain_db = radio.number("ref_gain_db", defaults.ref_gain_db)
        bandwidth = radio.number("bandwidth_hz", defaults.bandwidth)
        packet_bits = radio.number("packet_bits", defaults.packet_bits)
        noise_dbm = radio.number("noise_dbm", defaults.noise_dbm)
        uplink_rate = radio.number("uplink_rate_bps", defaults.uplink_rate)
        bs_height = radio.number("bs_height_m", defaults.bs_height)
        radio.finish()

        aoi = root.subsection("aoi")
        max_age = aoi.integer("max_age", defaults.max_age)
        aoi.finish()

        reward = root.subsection("reward")
        pw_raw = reward.raw("power_weight", list(defaults.power_weights))
        if isinstance(pw_raw, list):
            if not pw_raw:
                raise ConfigError("reward.power_weight: list must not be empty")
            power_weights = tuple(
                _number("reward", f"power_weight[{i}]", w) for i, w in enumerate(pw_raw)
            )
        else:
            power_weights = (_number("reward", "power_weight", pw_raw),)
        reward.finish()

        episode = root.subsection("episode")
        t_max = episode.integer("t_max", defaults.t_max)
        relay_per_device = episode.boolean("relay_per_device", defaults.relay_per_device)
        episode.finish()

        dqn_sec = root.subsection("dqn")
        dd = defaults.dqn
        hidden_raw = dqn_sec.raw("hidden_sizes", list(dd.hidden_sizes))
        if not (isinstance(hidden_raw, list) and hidden_raw):
            raise ConfigError("dqn.hidden_sizes: expected a non-empty list")
        hidden = tuple(_integer("dqn", f"hidden_sizes[{i}]", h) for i, h in enumerate(hidden_raw))
        huber_raw = dqn_sec.raw("huber_delta", dd.huber_delta)
        clip_raw = dqn_sec.raw("grad_clip", dd.grad_clip)
        dqn = DqnSettings(
            episodes=dqn_sec.integer("episodes", dd.episodes),
            gamma=dqn_sec.number("gamma", dd.gamma),
            learning_rate=dqn_sec.number("learning_rate", dd.learning_rate),
            batch_size=dqn_sec.integer("batch_size", dd.batch_size),
            buffer_capacity=dqn_sec.integer("buffer_capacity", dd.buffer_capacity),
            warmup=dqn_sec.integer("warmup", dd.warmup),
            target_sync=dqn_sec.integer("target_sync", dd.target_sync),
            epsilon_start=dqn_sec.number("epsilon_start", dd.epsilon_start),
            epsilon_floor=dqn_sec.number("epsilon_floor", dd.epsilon_floor),
            epsilon_decay_fraction=dqn_sec.number("epsilon_decay_fraction", dd.epsilon_decay_fraction),
            hidden_sizes=hidden,
            huber_delta=None if huber_raw is None else _number("dqn", "huber_delta", huber_raw),
            grad_clip=None if clip_raw is None else _number("dqn", "grad_clip", clip_raw),
        )
        dqn_sec.finish()

        evaluation = root.subsection("evaluation")
        eval_episodes = evaluation.integer("episodes", defaults.eval_episodes)
        evaluation.finish()

        seeds = root.subsection("seeds")
        seed_scenario = seeds.integer("scenario", defaults.seed_scenario)
        seed_training = seeds.integer("training", defaults.seed_training)
        seed_evaluation = seeds.integer("evaluation", defaults.seed_evaluation)
        seeds.finish()

        output = root.subsection("output")
        output_dir = output.string("dir", defaults.output_dir)
        output.finish()

        root.finish()
        config = cls(
            grid_cells=grid_cells, cell_size=cell_size,
            n_devices=n_devices, device_weights=device_weights,
            n_uavs=n_uavs, uav_altitude=uav_altitude, cruise_speed=cruise_speed,
            battery_capacity=battery_capacity, battery_quanta=battery_quanta,
            propulsion=propulsion,
            ref_gain_db=ref_gain_db, bandwidth=bandwidth, packet_bits=packet_bits,
            noise_dbm=noise_dbm, uplink_rate=uplink_rate, bs_height=bs_height,
            max_age=max_age, power_weights=power_weights,
            t_max=t_max, relay_per_device=relay_per_device,
            dqn=dqn, eval_episodes=eval_episodes,
            seed_scenario=seed_scenario, seed_training=seed_training,
            seed_evaluation=seed_evaluation, output_dir=output_dir,
        )
        config.validate()
        return config

    def to_dict(self) -> dict:
        return {
            "grid": {"cells_per_side": self.grid_cells, "cell_size_m": self.cell_size},
            "devices": {
                "count": self.n_devices,
                "weights": "uniform" if self.device_weights is None else list(self.device_weights),
            },
            "uavs": {
                "count": self.n_uavs,
                "altitude_m": self.uav_altitude,
                "cruise_speed_ms": self.cruise_speed,
                "battery_capacity_j": self.battery_capacity,
                "battery_quanta": self.battery_quanta,
                "propulsion": {
                    "profile_power_w": self.propulsion.profile_power,
                    "induced_power_w": self.propulsion.induced_power,
                    "tip_speed_ms": self.propulsion.tip_speed,
                    "hover_induced_speed_ms": self.propulsion.hover_induced_speed,
                    "drag_ratio": self.propulsion.drag_ratio,
                    "air_density": self.propulsion.air_density,
                    "rotor_solidity": self.propulsion.rotor_solidity,
                    "disk_area": self.propulsion.disk_area,
                },
            },
            "radio": {
                "ref_gain_db": self.ref_gain_db,
                "bandwidth_hz": self.bandwidth,
                "packet_bits": self.packet_bits,
                "noise_dbm": self.noise_dbm,
                "uplink_rate_bps": self.uplink_rate,
                "bs_height_m": self.bs_height,
            },
            "aoi": {"max_age": self.max_age},
            "reward": {"power_weight": list(self.power_weights)},
            "episode": {"t_max": self.t_max, "relay_per_device": self.relay_per_device},
            "dqn": {
                "episodes": self.dqn.episodes,
                "gamma": self.dqn.gamma,
                "learning_rate": self.dqn.learning_rate,
                "batch_size": self.dqn.batch_size,
                "buffer_capacity": self.dqn.buffer_capacity,
                "warmup": self.dqn.warmup,
                "target_sync": self.dqn.target_sync,
                "epsilon_start": self.dqn.epsilon_start,
                "epsilon_floor": self.dqn.epsilon_floor,
                "epsilon_decay_fraction": self.dqn.epsilon_decay_fraction,
                "hidden_sizes": list(self.dqn.hidden_sizes),
                "huber_delta": self.dqn.huber_delta,
                "grad_clip": self.dqn.grad_clip,
            },
            "evaluation": {"episodes": self.eval_episodes},
            "seeds": {
                "scenario": self.seed_scenario,
                "training": self.seed_training,
                "evaluation": self.seed_evaluation,
            },
            "output": {"dir": self.output_dir},
        }

    # ------------------------------------------------------- validation

    def validate(self) -> None:
        self.system_params(self.power_weights[0]).validate()
        GridSpec(cells_per_side=self.grid_cells, cell_size=self.cell_size)
        if self.n_devices < 1:
            raise ConfigError(f"devices.count must be >= 1, got {self.n_devices}")
        if self.device_weights is not None:
            if len(self.device_weights) != self.n_devices:
                raise ConfigError(
                    f"devices.weights lists {len(self.device_weights)} entries "
                    f"for {self.n_devices} devices"
                )
            if any(w < 0 for w in self.device_weights):
                raise ConfigError("devices.weights: entries must be >= 0")
            if sum(self.device_weights) <= 0:
                raise ConfigError("devices.weights: sum must be > 0")
        if not 1 <= self.n_uavs <= 4:
            raise ConfigError(f"uavs.count must be 1..4 (one depot each), got {self.n_uavs}")
        if any(w < 0 for w in self.power_weights):
            raise ConfigError("reward.power_weight: entries must be >= 0")
        if self.t_max < 1:
            raise ConfigError(f"episode.t_max must be >= 1, got {self.t_max}")
        if self.eval_episodes < 1:
            raise ConfigError("evaluation.episodes must be >= 1")
        d = self.dqn
        if d.episodes < 1:
            raise ConfigError("dqn.episodes must be >= 1")
        if not 0.0 <= d.gamma < 1.0:
            raise ConfigError(f"dqn.gamma must be in [0, 1), got {d.gamma}")
        if d.batch_size < 1 or d.batch_size > d.buffer_capacity:
            raise ConfigError("dqn: need 1 <= batch_size <= buffer_capacity")
        if d.warmup < d.batch_size:
            raise ConfigError("dqn.warmup must be >= dqn.batch_size")
        if d.learning_rate <= 0:
            raise ConfigError("dqn.learning_rate must be > 0")
        if not 0.0 <= d.epsilon_floor <= d.epsilon_start <= 1.0:
            raise ConfigError("dqn: need 0 <= epsilon_floor <= epsilon_start <= 1")
        cluster_capacity(self.system_params())  # raises if the rate is infeasible

    # ------------------------------------------------------ conversions

    def system_params(self, power_weight: float | None = None) -> SystemParams:
        return SystemParams(
            ref_gain=db_to_linear(self.ref_gain_db),
            uav_altitude=self.uav_altitude,
            bs_height=self.bs_height,
            bandwidth=self.bandwidth,
            packet_bits=self.packet_bits,
            noise_power=dbm_to_watts(self.noise_dbm),
            battery_capacity=self.battery_capacity,
            battery_quanta=self.battery_quanta,
            cell_size=self.cell_size,
            cruise_speed=self.cruise_speed,
            max_age=self.max_age,
            uplink_rate=self.uplink_rate,
            power_weight=self.power_weights[0] if power_weight is None else power_weight,
            propulsion=self.propulsion,
        )

    def grid(self) -> GridSpec:
        return GridSpec(cells_per_side=self.grid_cells, cell_size=self.cell_size)

    def weights_vector(self) -> tuple[float, ...]:
        if self.device_weights is not None:
            return self.device_weights
        return (1.0 / self.n_devices,) * self.n_devices

    # ------------------------------------------------------------- io

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        return cls.from_dict(read_json(path))

    def save(self, path: str) -> None:
        write_text_atomic(path, self.dumps())

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]
