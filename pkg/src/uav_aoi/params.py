"""Physical constants of the relay system, in SI units.

Radio quantities arrive in dB/dBm from configs and are stored linear here;
everything downstream (physics, environment, reward) works in watts, joules,
meters, seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

from .errors import ConfigError


def db_to_linear(value_db: float) -> float:
    """Convert a dB ratio to linear scale (30 dB -> 1000)."""
    return 10.0 ** (value_db / 10.0)


def dbm_to_watts(value_dbm: float) -> float:
    """Convert dBm to watts (-100 dBm -> 1e-13 W)."""
    return 10.0 ** ((value_dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class PropulsionParams:
    """Rotary-wing propulsion model coefficients.

    Defaults are the standard figures for a small rotary-wing UAV. The
    dimensionless blade/fuselage constants multiply into the parasite term
    only; hover power is profile_power + induced_power by construction.
    """

    profile_power: float = 99.66        # blade profile power at hover, W
    induced_power: float = 120.16       # induced power at hover, W
    tip_speed: float = 120.0            # rotor blade tip speed, m/s
    hover_induced_speed: float = 0.002  # mean rotor induced speed at hover, m/s
    drag_ratio: float = 0.48            # fuselage drag ratio
    air_density: float = 1.225          # kg/m^3
    rotor_solidity: float = 0.0001
    disk_area: float = 0.5              # rotor disk area figure, used as given

    def validate(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not (isinstance(value, (int, float)) and math.isfinite(value)):
                raise ConfigError(f"propulsion.{f.name} must be a finite number, got {value!r}")
            if value <= 0:
                raise ConfigError(f"propulsion.{f.name} must be > 0, got {value}")


@dataclass(frozen=True)
class SystemParams:
    """Everything the closed-form physics needs.

    ``power_weight`` is the age/power trade-off knob of the reward; it is the
    only field allowed to be zero.
    """

    ref_gain: float = 1000.0           # channel gain at 1 m, linear (30 dB)
    uav_altitude: float = 100.0        # m
    bs_height: float = 15.0            # m
    bandwidth: float = 1e6             # Hz
    packet_bits: float = 5e6           # bits per status update
    noise_power: float = 1e-13         # W (-100 dBm)
    battery_capacity: float = 10000.0  # J
    battery_quanta: int = 200          # quanta in a full battery
    cell_size: float = 100.0           # grid cell side, m
    cruise_speed: float = 25.0         # m/s
    max_age: int = 30                  # age ceiling, slots
    uplink_rate: float = 25e6          # fixed per-device uplink rate, bit/s
    power_weight: float = 0.0          # lambda in the reward
    propulsion: PropulsionParams = field(default_factory=PropulsionParams)

    @property
    def slot_duration(self) -> float:
        """Seconds per slot: time to cross one cell at cruise speed."""
        return self.cell_size / self.cruise_speed

    @property
    def quanta_per_joule(self) -> float:
        """Conversion factor from joules to battery quanta."""
        return self.battery_quanta / self.battery_capacity

    def validate(self) -> None:
        positive = (
            "ref_gain", "uav_altitude", "bs_height", "bandwidth", "packet_bits",
            "noise_power", "battery_capacity", "cell_size", "cruise_speed",
            "uplink_rate",
        )
        for name in positive:
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be a finite number > 0, got {value!r}")
        if not isinstance(self.battery_quanta, int) or self.battery_quanta < 1:
            raise ConfigError(f"battery_quanta must be an integer >= 1, got {self.battery_quanta!r}")
        if not isinstance(self.max_age, int) or self.max_age < 1:
            raise ConfigError(f"max_age must be an integer >= 1, got {self.max_age!r}")
        if not (math.isfinite(self.power_weight) and self.power_weight >= 0):
            raise ConfigError(f"power_weight must be finite and >= 0, got {self.power_weight!r}")
        if not math.isfinite(self.packet_bits / self.bandwidth):
            raise ConfigError("packet_bits / bandwidth is not finite")
        self.propulsion.validate()
