"""Closed-form physics of the relay system.

Channel gain, device transmit power, rotary-wing propulsion power, per-slot
energy quanta, battery bookkeeping, and age-of-information updates. All
functions are pure; the scalar ones accept numpy arrays where noted and
broadcast elementwise.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError
from .params import PropulsionParams, SystemParams


def required_snr(params: SystemParams) -> float:
    """SNR needed to push one packet through the band in one second.

    2^(packet_bits/bandwidth) - 1, from inverting the Shannon rate. Raises
    OverflowError when the exponent exceeds double precision (~1 packet-bit
    per 1023 Hz of bandwidth) instead of silently returning inf.
    """
    exponent = params.packet_bits / params.bandwidth
    try:
        factor = 2.0 ** exponent
    except OverflowError:
        factor = math.inf
    if not math.isfinite(factor):
        raise OverflowError(
            f"packet_bits/bandwidth = {exponent:g} overflows 2**x in double precision"
        )
    return factor - 1.0


def channel_gain_to_bs(uav_xy, params: SystemParams):
    """Line-of-sight channel gain between a UAV and the base station.

    ``uav_xy`` is the UAV's planar position in meters relative to the base
    station at the origin; the UAV flies at ``params.uav_altitude`` and the
    base station antenna sits at ``params.bs_height``. Accepts an (N, 2)
    array and returns per-row gains.
    """
    xy = np.asarray(uav_xy, dtype=np.float64)
    dz = params.uav_altitude - params.bs_height
    dist_sq = dz * dz + np.sum(xy * xy, axis=-1)
    return params.ref_gain / dist_sq


def device_tx_power(distance, params: SystemParams):
    """Transmit power (W) a device needs to reach a UAV ``distance`` meters
    away horizontally, with the UAV at altitude.

    Inverts the rate equation at the fixed uplink SNR target; broadcasts
    over array distances. Strictly increasing in distance.
    """
    d = np.asarray(distance, dtype=np.float64)
    coef = required_snr(params) * params.noise_power / params.ref_gain
    return coef * (d * d + params.uav_altitude ** 2)


def induced_velocity_factor(speed_ratio: float) -> float:
    """Square-root factor scaling induced hover power at forward speed.

    ``speed_ratio`` is v^2 / (2 * s0^2) with s0 the mean rotor induced speed
    at hover. The textbook form sqrt(sqrt(1 + r^2) - r) cancels
    catastrophically once r is large (for s0 = 0.002 that is any v above a
    few m/s), so for r > 1 we use the algebraically identical conjugate form
    sqrt(1 / (sqrt(1 + r^2) + r)), which stays fully accurate.
    """
    r = speed_ratio
    if r > 1.0:
        return math.sqrt(1.0 / (math.sqrt(1.0 + r * r) + r))
    return math.sqrt(math.sqrt(1.0 + r * r) - r)


def propulsion_power(speed: float, prop: PropulsionParams) -> float:
    """Rotary-wing propulsion power (W) at horizontal speed ``speed`` m/s.

    Blade profile + induced + parasite terms. At speed 0 this is exactly
    profile_power + induced_power.
    """
    if speed < 0:
        raise ConfigError(f"speed must be >= 0, got {speed}")
    v2 = speed * speed
    profile = prop.profile_power * (1.0 + 3.0 * v2 / prop.tip_speed ** 2)
    ratio = v2 / (2.0 * prop.hover_induced_speed ** 2)
    induced = prop.induced_power * induced_velocity_factor(ratio)
    parasite = (
        0.5 * prop.drag_ratio * prop.air_density
        * prop.rotor_solidity * prop.disk_area * v2 * speed
    )
    return profile + induced + parasite


def flight_energy_quanta(speed: float, params: SystemParams) -> float:
    """Battery quanta burned by flying one slot at ``speed`` (0 = hover).

    Real-valued; the caller ceilings once per slot over the whole bill via
    battery_step.
    """
    joules = propulsion_power(speed, params.propulsion) * params.slot_duration
    return joules * params.quanta_per_joule


def relay_energy_quanta(uav_xy, params: SystemParams):
    """Battery quanta burned relaying one packet from ``uav_xy`` to the BS.

    Transmit energy = required power at the UAV-BS link times one second of
    airtime per packet-second; broadcasts over (N, 2) positions.
    """
    power = params.noise_power * required_snr(params) / channel_gain_to_bs(uav_xy, params)
    return power * params.quanta_per_joule


def battery_step(level: int, scheduled: bool, relay_quanta: float, flight_quanta: float) -> int:
    """Next battery level after one slot.

    The slot's whole energy bill is ceilinged once: relay + flight when the
    UAV served a cluster this slot, flight alone otherwise. May go negative;
    the environment ends episodes via the battery margin before that matters.
    """
    if scheduled:
        spent = math.ceil(relay_quanta + flight_quanta)
    else:
        spent = math.ceil(flight_quanta)
    return level - spent


def aoi_step(ages: Sequence[int], served: Iterable[int], max_age: int) -> np.ndarray:
    """Advance per-cluster ages one slot.

    Clusters in ``served`` (1-based ids, matching schedule action values)
    reset to 1; every other age grows by 1 up to the ``max_age`` ceiling.
    """
    out = np.minimum(np.asarray(ages, dtype=np.int64) + 1, max_age)
    for cid in served:
        out[cid - 1] = 1
    return out
