"""Where to transmit from: payload levels, signal thresholds, disruption scores and policies.

The four policies differ only in how they pick the transmission spot:

* ``ART`` minimises the disruption score over logged samples above one
  minimum usable-signal threshold.
* ``ART-SST`` does the same with a threshold that rises with payload size.
* ``MSSC`` takes the qualifying sample closest to the Scout by path,
  ignoring transmission time.
* ``FRC`` always drives back to within 1 m of the Specialist.
"""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import rf
from .gridworld import FREE, Cell, Pose, cell_center
from .pathing import astar_cells, distance_field
from .rf import RfParams, SignalSample

PAYLOAD_BYTES = {0: 1_000, 1: 100_000, 2: 10_000_000, 3: 100_000_000}
RENDEZVOUS_RADIUS_M = 1.0


def payload_bytes(level: int) -> int:
    try:
        return PAYLOAD_BYTES[level]
    except KeyError:
        raise ValueError(f"tx level must be 0-3, got {level!r}") from None


def payload_bits(level: int) -> int:
    return 8 * payload_bytes(level)


class Policy(str, Enum):
    ART = "ART"
    ART_SST = "ART-SST"
    MSSC = "MSSC"
    FRC = "FRC"

    @classmethod
    def parse(cls, value: str | Policy) -> Policy:
        if isinstance(value, Policy):
            return value
        key = str(value).upper().replace("_", "-")
        for p in cls:
            if p.value == key:
                return p
        raise ValueError(f"unknown policy {value!r}")


class ThresholdMode(str, Enum):
    SINGLE_MINIMUM = "single_minimum"
    PER_LEVEL = "per_level"


@dataclass(frozen=True)
class ThresholdTable:
    mode: ThresholdMode
    values: tuple[float, ...]  # dBm; one value for SINGLE_MINIMUM, four for PER_LEVEL

    def __post_init__(self):
        if self.mode is ThresholdMode.SINGLE_MINIMUM and len(self.values) != 1:
            raise ValueError("single-minimum table takes exactly one threshold")
        if self.mode is ThresholdMode.PER_LEVEL:
            if len(self.values) != len(PAYLOAD_BYTES):
                raise ValueError("per-level table needs one threshold per tx level")
            if any(b < a for a, b in zip(self.values, self.values[1:])):
                raise ValueError("per-level thresholds must be non-decreasing in level")

    def threshold(self, level: int) -> float:
        payload_bytes(level)
        if self.mode is ThresholdMode.SINGLE_MINIMUM:
            return self.values[0]
        return self.values[level]


@dataclass(frozen=True)
class Thresholds:
    """Threshold configuration shared by all policies."""

    single_minimum_dbm: float = -80.0
    per_level_dbm: tuple[float, ...] = (-80.0, -70.0, -67.0, -60.0)

    def table(self, policy: Policy) -> ThresholdTable | None:
        policy = Policy.parse(policy)
        if policy is Policy.ART_SST:
            return ThresholdTable(ThresholdMode.PER_LEVEL, tuple(self.per_level_dbm))
        if policy is Policy.FRC:
            return None
        return ThresholdTable(ThresholdMode.SINGLE_MINIMUM, (self.single_minimum_dbm,))

    def validate(self, noise_floor_dbm: float) -> None:
        for v in (self.single_minimum_dbm, *self.per_level_dbm):
            if not v > noise_floor_dbm:
                raise ValueError(f"threshold {v} dBm is not above the noise floor {noise_floor_dbm} dBm")
        ThresholdTable(ThresholdMode.PER_LEVEL, tuple(self.per_level_dbm))


@dataclass(frozen=True)
class DisruptionScore:
    t_to_location: float
    t_transmitting: float
    t_return_to_frontier: float
    total: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "total", self.t_to_location + self.t_transmitting + self.t_return_to_frontier)

    @property
    def finite(self) -> bool:
        return math.isfinite(self.total)


INFINITE_SCORE = DisruptionScore(math.inf, math.inf, math.inf)


@dataclass(frozen=True)
class TxPlan:
    policy: Policy
    target_pose: Pose
    expected_rssi_dbm: float
    expected_score: DisruptionScore
    in_place: bool = False
    sample: SignalSample | None = None


def score_from_distances(
    to_m: float, back_m: float, level: int, rssi_dbm: float, speed_mps: float, params: RfParams
) -> DisruptionScore:
    if not speed_mps > 0:
        raise ValueError("speed must be positive")
    if math.isinf(to_m) or math.isinf(back_m):
        return INFINITE_SCORE
    return DisruptionScore(
        to_m / speed_mps,
        rf.transmission_time(params, payload_bits(level), rssi_dbm),
        back_m / speed_mps,
    )


def _path_length(mask: np.ndarray, a: Cell, b: Cell, resolution: float) -> float:
    if not mask[a] or not mask[b]:
        return math.inf
    path = astar_cells(mask, a, b, resolution)
    return math.inf if path is None else path.length_m


def compute_disruption_score(
    belief: np.ndarray,
    resolution: float,
    scout: Pose,
    candidate: Pose,
    frontier: Pose,
    level: int,
    rssi_at_candidate: float,
    scout_speed_mps: float,
    params: RfParams,
) -> DisruptionScore:
    """Time to detour to ``candidate``, transmit there, and reach ``frontier`` again."""
    mask = belief == FREE
    sc, cc, fc = (p.cell(resolution) for p in (scout, candidate, frontier))
    to_m = _path_length(mask, sc, cc, resolution)
    back_m = _path_length(mask, cc, fc, resolution) if math.isfinite(to_m) else math.inf
    return score_from_distances(to_m, back_m, level, rssi_at_candidate, scout_speed_mps, params)


def qualifying(log: Iterable[SignalSample], tau: float) -> list[SignalSample]:
    return [s for s in log if s.rssi_dbm >= tau]


def get_best_tx_location(
    log: Iterable[SignalSample],
    level: int,
    table: ThresholdTable,
    scout: Pose,
    frontier: Pose,
    belief: np.ndarray,
    resolution: float,
    scout_speed_mps: float,
    params: RfParams,
    policy: Policy = Policy.ART,
) -> TxPlan | None:
    """Least-disruptive logged sample at or above the level's threshold; None if there is none.

    Equal scores go to the earliest-logged sample.
    """
    tau = table.threshold(level)
    candidates = qualifying(log, tau)
    if not candidates:
        return None
    mask = belief == FREE
    sc, fc = scout.cell(resolution), frontier.cell(resolution)
    if not mask[sc]:
        return None
    to_field = distance_field(mask, sc, resolution)
    back_field = distance_field(mask, fc, resolution)
    best_key, best = None, None
    for s in candidates:
        c = s.pose.cell(resolution)
        score = score_from_distances(float(to_field[c]), float(back_field[c]), level, s.rssi_dbm, scout_speed_mps, params)
        if not score.finite:
            continue
        key = (score.total, s.tick, c)
        if best_key is None or key < best_key:
            best_key, best = key, (s, score)
    if best is None:
        return None
    s, score = best
    return TxPlan(Policy.parse(policy), s.pose, s.rssi_dbm, score, sample=s)


def nearest_qualifying(
    log: Iterable[SignalSample],
    tau: float,
    scout: Pose,
    frontier: Pose,
    belief: np.ndarray,
    resolution: float,
    scout_speed_mps: float,
    level: int,
    params: RfParams,
) -> TxPlan | None:
    """The MSSC choice: qualifying sample with the shortest path from the Scout."""
    candidates = qualifying(log, tau)
    if not candidates:
        return None
    mask = belief == FREE
    sc = scout.cell(resolution)
    if not mask[sc]:
        return None
    to_field = distance_field(mask, sc, resolution)
    best_key, best = None, None
    for s in candidates:
        c = s.pose.cell(resolution)
        d = float(to_field[c])
        if math.isinf(d):
            continue
        key = (d, s.tick, c)
        if best_key is None or key < best_key:
            best_key, best = key, s
    if best is None:
        return None
    c = best.pose.cell(resolution)
    back = float(distance_field(mask, frontier.cell(resolution), resolution)[c])
    score = score_from_distances(best_key[0], back, level, best.rssi_dbm, scout_speed_mps, params)
    return TxPlan(Policy.MSSC, best.pose, best.rssi_dbm, score, sample=best)


def rendezvous_path(
    belief: np.ndarray, resolution: float, scout: Pose, specialist: Pose, radius_m: float = RENDEZVOUS_RADIUS_M
) -> list[Cell] | None:
    """Known-free cell path from the Scout that stops at the first cell within ``radius_m`` of the Specialist."""
    mask = belief == FREE
    sc, tc = scout.cell(resolution), specialist.cell(resolution)
    if not mask[sc]:
        return None
    if cell_center(sc, resolution).distance_to(specialist) <= radius_m:
        return [sc]
    if not mask[tc]:
        return None
    path = astar_cells(mask, sc, tc, resolution)
    if path is None:
        return None
    cells = list(path.cells)
    for i, c in enumerate(cells):
        if cell_center(c, resolution).distance_to(specialist) <= radius_m:
            return cells[: i + 1]
    return cells


def _cells_length(cells: list[Cell], resolution: float) -> float:
    n_card = n_diag = 0
    for a, b in zip(cells, cells[1:]):
        if a[0] != b[0] and a[1] != b[1]:
            n_diag += 1
        else:
            n_card += 1
    return (n_card + n_diag * math.sqrt(2.0)) * resolution


def frc_plan(
    log: Iterable[SignalSample],
    level: int,
    scout: Pose,
    frontier: Pose,
    belief: np.ndarray,
    resolution: float,
    scout_speed_mps: float,
    params: RfParams,
    specialist_last_known: Pose,
) -> TxPlan | None:
    cells = rendezvous_path(belief, resolution, scout, specialist_last_known)
    if cells is None:
        return None
    target = cells[-1]
    logged = {s.pose.cell(resolution): s for s in log}
    expected = logged[target].rssi_dbm if target in logged else max(
        (s.rssi_dbm for s in logged.values() if s.pose.distance_to(specialist_last_known) <= RENDEZVOUS_RADIUS_M),
        default=rf.NO_LINK,
    )
    mask = belief == FREE
    to_m = _cells_length(cells, resolution)
    back_m = _path_length(mask, target, frontier.cell(resolution), resolution)
    score = score_from_distances(to_m, back_m, level, expected, scout_speed_mps, params)
    return TxPlan(Policy.FRC, cell_center(target, resolution), expected, score, sample=logged.get(target))


def in_tx_range(
    policy: Policy,
    level: int,
    current_rssi_dbm: float,
    scout: Pose,
    specialist_last_known: Pose,
    thresholds: Thresholds,
) -> bool:
    """Whether the Scout may transmit right where it is."""
    policy = Policy.parse(policy)
    if policy is Policy.FRC:
        return scout.distance_to(specialist_last_known) <= RENDEZVOUS_RADIUS_M
    return current_rssi_dbm >= thresholds.table(policy).threshold(level)


def plan_transmission(
    policy: Policy | str,
    log: Iterable[SignalSample],
    level: int,
    thresholds: Thresholds,
    scout: Pose,
    frontier: Pose,
    belief: np.ndarray,
    resolution: float,
    scout_speed_mps: float,
    params: RfParams,
    specialist_last_known: Pose,
    current_rssi_dbm: float = rf.NO_LINK,
) -> TxPlan | None:
    """Transmission plan for ``policy``, or None when no logged sample qualifies."""
    policy = Policy.parse(policy)
    if in_tx_range(policy, level, current_rssi_dbm, scout, specialist_last_known, thresholds):
        score = DisruptionScore(0.0, rf.transmission_time(params, payload_bits(level), current_rssi_dbm), 0.0)
        return TxPlan(policy, scout, current_rssi_dbm, score, in_place=True)
    log = list(log)
    if policy is Policy.FRC:
        return frc_plan(log, level, scout, frontier, belief, resolution, scout_speed_mps, params, specialist_last_known)
    table = thresholds.table(policy)
    if policy is Policy.MSSC:
        return nearest_qualifying(
            log, table.threshold(level), scout, frontier, belief, resolution, scout_speed_mps, level, params
        )
    return get_best_tx_location(
        log, level, table, scout, frontier, belief, resolution, scout_speed_mps, params, policy=policy
    )
