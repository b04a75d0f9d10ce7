"""Discrete-time Scout/Specialist exploration episodes.

One episode: the Scout repeatedly picks the nearest frontier and drives to
it, revealing the map and logging RSSI to the Specialist every tick.  When it
sees a TxEvent it either transmits in place or detours to a transmission spot
chosen by the configured policy, transmits, drives back to where it left off
and resumes.  The episode ends when no frontier is left and nothing is pending,
or when the mission clock reaches its limit.
"""

from __future__ import annotations

import csv
import hashlib
import math
import weakref
from collections import deque
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from . import rf
from .frontier import FrontierCandidate, detect_frontiers
from .gridworld import (
    FREE,
    OBSTACLE,
    UNKNOWN,
    Cell,
    Environment,
    OccupancyGrid,
    Pose,
    TxEvent,
    cell_center,
    new_belief,
    visible_cells,
)
from .pathing import GraphField, astar_cells
from .rf import RfParams, ShadowFading, SignalSample
from .strategy import Policy, Thresholds, TxPlan, payload_bits, plan_transmission, rendezvous_path


class ScoutMode(str, Enum):
    EXPLORING = "exploring"
    NAVIGATING_TO_TX = "navigating_to_tx"
    TRANSMITTING = "transmitting"
    RETURNING = "returning"
    DONE = "done"


class Termination(str, Enum):
    FRONTIERS_EXHAUSTED = "frontiers_exhausted"
    TIME_LIMIT = "time_limit"


@dataclass(frozen=True)
class EpisodeConfig:
    policy: Policy = Policy.ART
    tx_level: int = 0
    max_mission_time_s: float = 1800.0
    tick_dt_s: float = 0.1
    scout_speed_mps: float = 1.0
    specialist_speed_mps: float = 0.5
    sensor_range_m: float = 5.0
    rf: RfParams = field(default_factory=RfParams)
    thresholds: Thresholds = field(default_factory=Thresholds)
    seed: int = 0
    specialist_goals: bool = False
    replan_on_goal_invalidation: bool = True
    record_trace: bool = False

    def validate(self, resolution: float) -> None:
        Policy.parse(self.policy)
        if self.tx_level not in (0, 1, 2, 3):
            raise ValueError("tx_level must be 0-3")
        for name in ("max_mission_time_s", "tick_dt_s", "scout_speed_mps", "specialist_speed_mps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.sensor_range_m >= 0:
            raise ValueError("sensor_range_m must be non-negative")
        for speed in (self.scout_speed_mps, self.specialist_speed_mps):
            if speed * self.tick_dt_s > resolution + 1e-12:
                raise ValueError("one tick of motion must not exceed one cell")
        self.thresholds.validate(self.rf.noise_floor_dbm)

    def with_policy(self, policy, tx_level: int | None = None) -> EpisodeConfig:
        return replace(self, policy=Policy.parse(policy), tx_level=self.tx_level if tx_level is None else tx_level)


@dataclass
class SpecialistState:
    pose: Pose
    last_acknowledged_tick: int = 0
    goal: Pose | None = None
    status: str = "idle"  # idle | navigating | waiting | failed
    waypoints: deque = field(default_factory=deque)


def assign_specialist_goal(state: SpecialistState, goal: Pose, belief: np.ndarray, resolution: float) -> SpecialistState:
    """Plan the Specialist's route to ``goal`` over the map the Scout shared."""
    state.goal = goal
    here, there = state.pose.cell(resolution), goal.cell(resolution)
    if here == there:
        state.status = "waiting"
        state.waypoints = deque()
        return state
    mask = belief == FREE
    path = astar_cells(mask, here, there, resolution) if mask[here] and mask[there] else None
    if path is None:
        state.status = "failed"
        state.waypoints = deque()
        return state
    state.status = "navigating"
    state.waypoints = deque(cell_center(c, resolution) for c in path.cells[1:])
    if goal != state.waypoints[-1]:
        state.waypoints.append(goal)
    return state


def specialist_step(state: SpecialistState, dt: float, speed_mps: float) -> SpecialistState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    if state.status != "navigating":
        return state
    state.pose, _ = _advance(state.pose, state.waypoints, speed_mps * dt)
    if not state.waypoints:
        state.status = "waiting"
    return state


def _advance(pose: Pose, waypoints: deque, step: float) -> tuple[Pose, float]:
    travelled = 0.0
    while step > 1e-12 and waypoints:
        tgt = waypoints[0]
        d = pose.distance_to(tgt)
        if d <= step:
            pose = tgt
            step -= d
            travelled += d
            waypoints.popleft()
        else:
            f = step / d
            pose = Pose(pose.x + (tgt.x - pose.x) * f, pose.y + (tgt.y - pose.y) * f)
            travelled += step
            step = 0.0
    return pose, travelled


@dataclass(frozen=True)
class TransmissionRecord:
    event: str
    level: int
    trigger_tick: int
    trigger_time_s: float
    trigger_pose: Pose
    target_pose: Pose
    specialist_pose: Pose
    in_place: bool
    fallback: bool
    expected_total_s: float
    realized_rssi_dbm: float
    t_transmitting_s: float
    backtrack_m: float
    return_m: float
    signal_distance_m: float
    traversal_distance_m: float
    delivered: bool = True


@dataclass
class EpisodeMetrics:
    environment: str
    policy: str
    tx_level: int
    seed: int
    scout_path_distance_m: float
    exploration_time_s: float
    coverage_final: float
    termination: str
    ticks: int
    transmit_time_s: float
    transmissions: list[TransmissionRecord]
    coverage_series: list[tuple[float, float]]
    trace_hash: str
    trace: list[dict] | None = None

    @property
    def n_transmissions(self) -> int:
        return len(self.transmissions)


TRACE_FIELDS = ("tick", "time_s", "scout_x", "scout_y", "specialist_x", "specialist_y", "rssi_dbm", "mode", "coverage")


def write_trace_csv(path: str | Path, trace: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TRACE_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in trace:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


# --- per-grid caches ---------------------------------------------------------

_signal_fields: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()
_reachable: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()


def signal_field(truth: OccupancyGrid, source: Cell) -> np.ndarray:
    """Signal-path distance from ``source`` to every cell of the true map (cached)."""
    per_grid = _signal_fields.setdefault(truth, {})
    if source not in per_grid:
        if len(per_grid) > 256:
            per_grid.clear()
        if truth.rf_transparent[source]:
            per_grid[source] = GraphField(truth.rf_transparent, source, truth.resolution).distance
        else:
            per_grid[source] = np.full(truth.shape, math.inf)
    return per_grid[source]


_views: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()


def sensor_view(truth: OccupancyGrid, cell: Cell, sensor_range_m: float) -> tuple[np.ndarray, np.ndarray]:
    """Flat indices of the cells visible from ``cell``'s center and their true belief values (cached)."""
    per_grid = _views.setdefault(truth, {})
    key = (cell, sensor_range_m)
    view = per_grid.get(key)
    if view is None:
        rows, cols = visible_cells(truth, cell_center(cell, truth.resolution), sensor_range_m)
        idx = np.unique(rows * truth.width + cols)
        vals = np.where(truth.traversable.ravel()[idx], FREE, OBSTACLE).astype(np.int8)
        view = per_grid[key] = (idx, vals)
    return view


def reachable_free(truth: OccupancyGrid, start: Cell) -> np.ndarray:
    per_grid = _reachable.setdefault(truth, {})
    if start not in per_grid:
        per_grid[start] = np.isfinite(GraphField(truth.traversable, start, truth.resolution).distance)
    return per_grid[start]


def sample_signal(
    truth: OccupancyGrid, scout: Pose, specialist: Pose, params: RfParams, fading: ShadowFading | None, tick: int
) -> SignalSample:
    res = truth.resolution
    d = signal_field(truth, specialist.cell(res))[scout.cell(res)]
    draw = fading.draw() if fading is not None and params.shadow_sigma_db > 0 else None
    return SignalSample(rf.rssi(params, float(d), draw), scout, tick)


def transmit(level: int, realized_rssi_dbm: float, params: RfParams) -> tuple[float, bool]:
    """Seconds spent sending the payload, and whether the Specialist acknowledged it."""
    bits = payload_bits(level)
    if bits == 0:
        return 0.0, True
    if rf.channel_capacity(params, realized_rssi_dbm) <= 0:
        return 0.0, False
    return rf.transmission_time(params, bits, realized_rssi_dbm), True


class _TimeUp(Exception):
    pass


class Episode:
    """Mutable state of one run; use :func:`run_episode`."""

    def __init__(self, config: EpisodeConfig, env: Environment):
        config.validate(env.grid.resolution)
        self.cfg = config
        self.policy = Policy.parse(config.policy)
        self.env = env
        self.truth = env.grid
        self.res = env.grid.resolution
        self.belief = new_belief(self.truth)
        self.fading = ShadowFading(config.seed)
        self.pose = env.start
        self.cell = env.start.cell(self.res)
        if not self.truth.traversable[self.cell]:
            raise ValueError("start pose must be traversable")
        self.specialist = SpecialistState(env.start)
        self.specialist_last_known = env.start
        self.mode = ScoutMode.EXPLORING
        self.tick = 0
        self.tx_total = 0.0
        self.distance = 0.0
        self.log: dict[Cell, SignalSample] = {}
        self.last_sample: SignalSample | None = None
        self.undetected = list(env.events)
        self.pending: deque[TxEvent] = deque()
        self.records: list[TransmissionRecord] = []
        self.reachable = reachable_free(self.truth, self.cell)
        self.n_reachable = int(self.reachable.sum())
        self._reachable_flat = self.reachable.ravel()
        self.n_known = 0
        self.coverage = 0.0
        self.coverage_series: list[tuple[float, float]] = []
        self.trace: list[dict] | None = [] if config.record_trace else None
        self._hash = hashlib.sha256()
        self.waypoints: deque = deque()
        self.goal: FrontierCandidate | None = None
        self.saved_pose: Pose | None = None

    @property
    def clock(self) -> float:
        return self.tick * self.cfg.tick_dt_s + self.tx_total

    # --- per-tick machinery ---

    def _sense(self) -> None:
        idx, vals = sensor_view(self.truth, self.cell, self.cfg.sensor_range_m)
        flat = self.belief.ravel()
        fresh = flat[idx] == UNKNOWN
        self.n_known += int(np.count_nonzero(fresh & self._reachable_flat[idx]))
        flat[idx] = vals
        self.coverage = self.n_known / self.n_reachable
        for ev in list(self.undetected):
            er, ec = ev.pose.cell(self.res)
            k = np.searchsorted(idx, er * self.truth.width + ec)
            if k < idx.size and idx[k] == er * self.truth.width + ec:
                self.undetected.remove(ev)
                self.pending.append(ev)

    def _sample(self) -> SignalSample:
        s = sample_signal(self.truth, self.pose, self.specialist.pose, self.cfg.rf, self.fading, self.tick)
        self.last_sample = s
        if math.isfinite(s.rssi_dbm):
            self.log[self.cell] = s
        return s

    def _record_tick(self) -> None:
        s = self.last_sample
        row = (
            self.tick,
            self.clock,
            self.pose.x,
            self.pose.y,
            self.specialist.pose.x,
            self.specialist.pose.y,
            s.rssi_dbm,
            self.mode.value,
            self.coverage,
        )
        self._hash.update(repr(row).encode())
        if not self.coverage_series or self.coverage_series[-1][1] != self.coverage:
            self.coverage_series.append((self.clock, self.coverage))
        if self.trace is not None:
            self.trace.append(dict(zip(TRACE_FIELDS, row)))

    def _observe(self) -> None:
        self._sense()
        self._sample()
        self._record_tick()

    def _step(self) -> float:
        if self.clock >= self.cfg.max_mission_time_s:
            raise _TimeUp
        self.pose, moved = _advance(self.pose, self.waypoints, self.cfg.scout_speed_mps * self.cfg.tick_dt_s)
        self.distance += moved
        self.tick += 1
        if self.cfg.specialist_goals:
            specialist_step(self.specialist, self.cfg.tick_dt_s, self.cfg.specialist_speed_mps)
        cell = self.pose.cell(self.res)
        if cell != self.cell:
            self.cell = cell
            self._sense()
        self._sample()
        self._record_tick()
        return moved

    def _drive(self, cells: list[Cell], final: Pose | None = None, stop_when=None) -> float:
        """Follow a cell path (then ``final``) to the end; returns distance driven."""
        self.waypoints = deque(cell_center(c, self.res) for c in cells)
        if final is not None:
            self.waypoints.append(final)
        driven = 0.0
        while self.waypoints:
            driven += self._step()
            if stop_when is not None and stop_when():
                self.waypoints.clear()
                break
        return driven

    def _path_cells(self, target: Cell) -> list[Cell] | None:
        mask = self.belief == FREE
        if not mask[self.cell] or not mask[target]:
            return None
        path = astar_cells(mask, self.cell, target, self.res)
        return None if path is None else list(path.cells)

    # --- transmissions ---

    def _threshold_met(self, level: int) -> bool:
        table = self.cfg.thresholds.table(self.policy) or self.cfg.thresholds.table(Policy.MSSC)
        return self.last_sample.rssi_dbm >= table.threshold(level)

    def _handle_event(self, event: TxEvent) -> None:
        level = self.cfg.tx_level if event.level is None else event.level
        trigger_tick, trigger_time, trigger_pose = self.tick, self.clock, self.pose
        frontier_pose = self.goal.pose if self.goal is not None else self.pose
        plan = plan_transmission(
            self.policy,
            self.log.values(),
            level,
            self.cfg.thresholds,
            self.pose,
            frontier_pose,
            self.belief,
            self.res,
            self.cfg.scout_speed_mps,
            self.cfg.rf,
            self.specialist_last_known,
            current_rssi_dbm=self.last_sample.rssi_dbm,
        )
        saved_waypoints = deque(self.waypoints)
        self.saved_pose = self.pose
        backtrack = 0.0
        fallback = plan is None
        self.mode = ScoutMode.NAVIGATING_TO_TX
        if plan is not None and not plan.in_place:
            cells = self._path_cells(plan.target_pose.cell(self.res))
            if cells is None:
                fallback = True
            else:
                backtrack += self._drive(cells)
        delivered, realized, t_tx = False, self.last_sample.rssi_dbm, 0.0
        for attempt in range(3):
            if fallback or attempt > 0:
                cells = rendezvous_path(self.belief, self.res, self.pose, self.specialist_last_known)
                if cells is not None:
                    backtrack += self._drive(cells, stop_when=lambda: self._threshold_met(level))
            self.mode = ScoutMode.TRANSMITTING
            realized = self.last_sample.rssi_dbm
            t_tx, delivered = transmit(level, realized, self.cfg.rf)
            if delivered:
                break
            fallback = True
            self.mode = ScoutMode.NAVIGATING_TO_TX
        self.tx_total += t_tx
        tx_pose = self.pose
        if delivered:
            self.specialist.last_acknowledged_tick = self.tick
            self.specialist_last_known = self.specialist.pose
            if self.cfg.specialist_goals:
                assign_specialist_goal(self.specialist, event.pose, self.belief, self.res)
        sig = float(signal_field(self.truth, self.specialist.pose.cell(self.res))[tx_pose.cell(self.res)])
        trav_path = astar_cells(
            self.truth.traversable, tx_pose.cell(self.res), self.specialist.pose.cell(self.res), self.res
        )
        self.mode = ScoutMode.TRANSMITTING
        self._record_tick()
        self.mode = ScoutMode.RETURNING
        returned = 0.0
        if tx_pose != self.saved_pose:
            cells = self._path_cells(self.saved_pose.cell(self.res)) or [self.cell]
            returned = self._drive(cells, final=self.saved_pose)
        self.records.append(
            TransmissionRecord(
                event=event.name,
                level=level,
                trigger_tick=trigger_tick,
                trigger_time_s=trigger_time,
                trigger_pose=trigger_pose,
                target_pose=tx_pose,
                specialist_pose=self.specialist.pose,
                in_place=bool(plan is not None and plan.in_place),
                fallback=fallback,
                expected_total_s=plan.expected_score.total if plan is not None else math.inf,
                realized_rssi_dbm=realized,
                t_transmitting_s=t_tx,
                backtrack_m=backtrack,
                return_m=returned,
                signal_distance_m=sig,
                traversal_distance_m=math.inf if trav_path is None else trav_path.length_m,
                delivered=delivered,
            )
        )
        self.waypoints = saved_waypoints
        self.saved_pose = None
        self.mode = ScoutMode.EXPLORING

    # --- exploration ---

    def _goal_invalid(self) -> bool:
        if self.goal is None:
            return True
        r, c = self.goal.cell
        return not (self.belief[max(r - 1, 0) : r + 2, max(c - 1, 0) : c + 2] == UNKNOWN).any()

    def _choose_goal(self) -> bool:
        field_ = GraphField(self.belief == FREE, self.cell, self.res)
        for cand in detect_frontiers(self.belief, self.pose, self.res, field=field_):
            cells = field_.path_to(cand.cell)
            if cells is None:
                continue
            self.goal = cand
            self.waypoints = deque(cell_center(c, self.res) for c in cells)
            return True
        self.goal = None
        return False

    def run(self) -> EpisodeMetrics:
        self._observe()
        termination = Termination.FRONTIERS_EXHAUSTED
        try:
            while True:
                if self.clock >= self.cfg.max_mission_time_s:
                    raise _TimeUp
                if self.pending:
                    self._handle_event(self.pending.popleft())
                    continue
                if not self.waypoints or (self.cfg.replan_on_goal_invalidation and self._goal_invalid()):
                    if not self._choose_goal():
                        if self.pending:
                            continue
                        break
                self._step()
                if not self.waypoints:
                    self.goal = None
        except _TimeUp:
            termination = Termination.TIME_LIMIT
        self.mode = ScoutMode.DONE
        return EpisodeMetrics(
            environment=self.env.name,
            policy=self.policy.value,
            tx_level=self.cfg.tx_level,
            seed=self.cfg.seed,
            scout_path_distance_m=self.distance,
            exploration_time_s=min(self.clock, self.cfg.max_mission_time_s)
            if termination is Termination.TIME_LIMIT
            else self.clock,
            coverage_final=self.coverage,
            termination=termination.value,
            ticks=self.tick,
            transmit_time_s=self.tx_total,
            transmissions=self.records,
            coverage_series=self.coverage_series,
            trace_hash=self._hash.hexdigest(),
            trace=self.trace,
        )


def run_episode(config: EpisodeConfig, env: Environment) -> EpisodeMetrics:
    return Episode(config, env).run()


def metrics_summary(m: EpisodeMetrics) -> dict:
    d = asdict(m)
    d.pop("trace", None)
    return d
