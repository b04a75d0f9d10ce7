"""Radio link model: free-space reference, log-distance path loss, Shannon capacity.

All powers are in dBm unless a name says otherwise.  An unreachable signal
path is reported as ``NO_LINK`` (negative infinity dBm), which yields zero SNR,
zero capacity and an infinite transmission time.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .gridworld import Pose

SPEED_OF_LIGHT = 299_792_458.0
NO_LINK = -math.inf


def wavelength(frequency_hz: float) -> float:
    return SPEED_OF_LIGHT / frequency_hz


def free_space_loss_db(wavelength_m: float, distance_m: float) -> float:
    return 20.0 * math.log10(4.0 * math.pi * distance_m / wavelength_m)


@dataclass(frozen=True)
class RfParams:
    """Radio constants.  ``reference_loss_db=None`` derives PL(d0) from free space at d0."""

    transmit_power_dbm: float = 20.0
    tx_gain_db: float = 0.0
    rx_gain_db: float = 0.0
    wavelength_m: float = 0.12491
    reference_distance_m: float = 1.0
    reference_loss_db: float | None = None
    path_loss_exponent: float = 3.0
    shadow_sigma_db: float = 0.0
    noise_floor_dbm: float = -88.0
    bandwidth_hz: float = 20e6

    def __post_init__(self):
        if not self.wavelength_m > 0:
            raise ValueError("wavelength_m must be positive")
        if not self.reference_distance_m > 0:
            raise ValueError("reference_distance_m must be positive")
        if not self.bandwidth_hz > 0:
            raise ValueError("bandwidth_hz must be positive")
        if not self.shadow_sigma_db >= 0:
            raise ValueError("shadow_sigma_db must be non-negative")
        if not self.path_loss_exponent > 0:
            raise ValueError("path_loss_exponent must be positive")

    @property
    def pl0_db(self) -> float:
        if self.reference_loss_db is not None:
            return self.reference_loss_db
        return free_space_loss_db(self.wavelength_m, self.reference_distance_m)

    @property
    def link_budget_dbm(self) -> float:
        return self.transmit_power_dbm + self.tx_gain_db + self.rx_gain_db

    def to_dict(self) -> dict:
        return asdict(self)


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    if mw <= 0:
        return NO_LINK
    return 10.0 * math.log10(mw)


def friis_received_power(params: RfParams, distance_m: float) -> float:
    """Free-space received power in dBm."""
    if not distance_m > 0:
        raise ValueError("distance must be positive")
    return params.link_budget_dbm - free_space_loss_db(params.wavelength_m, distance_m)


def path_loss_db(params: RfParams, distance_m: float, noise_draw: float | None = None) -> float:
    """Log-distance path loss; distances below d0 are clamped to d0."""
    d = max(distance_m, params.reference_distance_m)
    loss = params.pl0_db + 10.0 * params.path_loss_exponent * math.log10(d / params.reference_distance_m)
    if noise_draw is not None and params.shadow_sigma_db > 0:
        loss += params.shadow_sigma_db * noise_draw
    return loss


def rssi(params: RfParams, signal_path_distance_m: float, noise_draw: float | None = None) -> float:
    if signal_path_distance_m is None or math.isinf(signal_path_distance_m):
        return NO_LINK
    return params.link_budget_dbm - path_loss_db(params, signal_path_distance_m, noise_draw)


def snr_linear(rssi_dbm: float, noise_floor_dbm: float) -> float:
    return dbm_to_mw(rssi_dbm) / dbm_to_mw(noise_floor_dbm)


def channel_capacity(params: RfParams, rssi_dbm: float) -> float:
    """Shannon capacity in bits per second."""
    return params.bandwidth_hz * math.log2(1.0 + snr_linear(rssi_dbm, params.noise_floor_dbm))


def transmission_time(params: RfParams, payload_bits: float, rssi_dbm: float) -> float:
    if payload_bits < 0:
        raise ValueError("payload_bits must be non-negative")
    if payload_bits == 0:
        return 0.0
    capacity = channel_capacity(params, rssi_dbm)
    if capacity <= 0:
        return math.inf
    return payload_bits / capacity


class ShadowFading:
    """Seeded source of standard-normal draws for the X_sigma term."""

    def __init__(self, seed: int | None):
        self._rng = np.random.default_rng(seed)

    def draw(self) -> float:
        return float(self._rng.standard_normal())


@dataclass(frozen=True)
class SignalSample:
    """One logged RSSI measurement and where/when it was taken."""

    rssi_dbm: float
    pose: Pose
    tick: int
