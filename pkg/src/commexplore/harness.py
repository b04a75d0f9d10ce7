"""Batch sweeps over environment x policy x tx level x trial, CSV aggregation and raster export."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .gridworld import (
    DEFAULT_SPECS,
    Environment,
    OccupancyGrid,
    Pose,
    generate_environment,
    grid_to_pgm_values,
    write_pgm,
)
from .rf import RfParams
from .sim import EpisodeConfig, Termination, TransmissionRecord, run_episode, write_trace_csv
from .strategy import PAYLOAD_BYTES, Policy, Thresholds

log = logging.getLogger(__name__)

EPISODE_FIELDS = (
    "env",
    "policy",
    "level",
    "seed",
    "path_m",
    "time_s",
    "coverage_final",
    "n_transmissions",
    "termination",
)
SUMMARY_FIELDS = (
    "env",
    "policy",
    "level",
    "n",
    "path_mean_m",
    "path_std_m",
    "time_mean_s",
    "time_std_s",
    "n_excluded",
    "single_trial",
    "best_path",
    "best_time",
)
TRANSMISSION_FIELDS = (
    "env",
    "policy",
    "level",
    "seed",
    "event",
    "in_place",
    "fallback",
    "delivered",
    "tx_x",
    "tx_y",
    "realized_rssi_dbm",
    "t_transmitting_s",
    "backtrack_m",
    "return_m",
    "signal_distance_m",
    "traversal_distance_m",
)
ERROR_TERMINATION = "error"
HEATMAP_NODATA = math.nan

_EPISODE_OVERRIDES = {
    f.name for f in fields(EpisodeConfig) if f.name not in ("policy", "tx_level", "seed", "rf", "thresholds")
}


def derive_seed(master_seed: int, env: str, policy: str, level: int, trial: int) -> int:
    """Per-episode seed: the first 63 bits of sha256 over the identifying tuple."""
    key = f"{master_seed}|{env}|{policy}|{level}|{trial}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big") >> 1


@dataclass
class SweepSpec:
    """Everything a sweep needs.  ``seeds`` is a trial count or an explicit list of episode seeds."""

    environments: list[str] = field(default_factory=lambda: list(DEFAULT_SPECS))
    policies: list[str] = field(default_factory=lambda: [p.value for p in Policy])
    tx_levels: list[int] = field(default_factory=lambda: list(PAYLOAD_BYTES))
    seeds: int | list[int] = 10
    master_seed: int = 0
    episode: dict = field(default_factory=dict)
    rf: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    resolution: float = 0.25
    output_dir: str = "results"
    workers: int | None = None
    trace: bool = False
    heatmap: bool = False

    def __post_init__(self):
        self.policies = [Policy.parse(p).value for p in self.policies]
        self.tx_levels = [int(v) for v in self.tx_levels]

    def validate(self) -> None:
        for name in ("environments", "policies", "tx_levels"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")
        for env in self.environments:
            if env not in DEFAULT_SPECS:
                raise ValueError(f"unknown environment {env!r}; choose from {sorted(DEFAULT_SPECS)}")
        for level in self.tx_levels:
            if level not in PAYLOAD_BYTES:
                raise ValueError(f"tx level must be 0-3, got {level}")
        if isinstance(self.seeds, int):
            if self.seeds < 1:
                raise ValueError("seeds count must be at least 1")
        else:
            if not self.seeds:
                raise ValueError("seeds must be non-empty")
            if len(set(self.seeds)) != len(self.seeds):
                raise ValueError("seeds must be distinct")
        unknown = set(self.episode) - _EPISODE_OVERRIDES
        if unknown:
            raise ValueError(f"unknown episode overrides: {sorted(unknown)}")
        if self.workers is not None and self.workers < 1:
            raise ValueError("workers must be positive")
        self.base_config().validate(self.resolution)

    @property
    def n_trials(self) -> int:
        return self.seeds if isinstance(self.seeds, int) else len(self.seeds)

    def base_config(self) -> EpisodeConfig:
        thresholds = dict(self.thresholds)
        if "per_level_dbm" in thresholds:
            thresholds["per_level_dbm"] = tuple(thresholds["per_level_dbm"])
        return EpisodeConfig(rf=RfParams(**self.rf), thresholds=Thresholds(**thresholds), **self.episode)

    def episode_seed(self, env: str, policy: str, level: int, trial: int) -> int:
        if isinstance(self.seeds, int):
            return derive_seed(self.master_seed, env, policy, level, trial)
        return int(self.seeds[trial])

    def jobs(self) -> list[Job]:
        """Every episode in output order: env, then policy, then level, then trial."""
        base = self.base_config()
        out = []
        for env in self.environments:
            for policy in self.policies:
                for level in self.tx_levels:
                    for trial in range(self.n_trials):
                        seed = self.episode_seed(env, policy, level, trial)
                        cfg = replace(
                            base,
                            policy=Policy.parse(policy),
                            tx_level=level,
                            seed=seed,
                            record_trace=base.record_trace or self.trace or self.heatmap,
                        )
                        out.append(Job(env, policy, level, trial, cfg, self.resolution))
        return out

    @classmethod
    def from_dict(cls, data: dict) -> SweepSpec:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown sweep keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | Path) -> SweepSpec:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class Job:
    env: str
    policy: str
    level: int
    trial: int
    config: EpisodeConfig
    resolution: float


@dataclass
class EpisodeResult:
    env: str
    policy: str
    level: int
    trial: int
    seed: int
    path_m: float
    time_s: float
    coverage_final: float
    n_transmissions: int
    termination: str
    trace_hash: str = ""
    transmissions: list[TransmissionRecord] = field(default_factory=list)
    trace: list[dict] | None = None
    error: str | None = None
    wall_s: float = 0.0

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def terminated(self) -> bool:
        return self.termination == Termination.FRONTIERS_EXHAUSTED.value


@dataclass(frozen=True)
class SummaryRow:
    env: str
    policy: str
    level: int
    n: int
    path_mean_m: float
    path_std_m: float
    time_mean_s: float
    time_std_s: float
    n_excluded: int = 0
    best_path: bool = False
    best_time: bool = False

    @property
    def single_trial(self) -> bool:
        return self.n == 1


@dataclass
class SweepResult:
    episodes: list[EpisodeResult]
    summary: list[SummaryRow]
    output_dir: Path | None
    elapsed_s: float

    @property
    def n_errors(self) -> int:
        return sum(not e.ok for e in self.episodes)

    @property
    def exit_code(self) -> int:
        return 1 if self.n_errors else 0


@lru_cache(maxsize=None)
def _environment(name: str, resolution: float) -> Environment:
    return generate_environment(DEFAULT_SPECS[name], resolution)


def run_job(job: Job) -> EpisodeResult:
    t0 = time.perf_counter()
    try:
        m = run_episode(job.config, _environment(job.env, job.resolution))
    except Exception as exc:  # recorded, the sweep carries on
        return EpisodeResult(
            job.env, job.policy, job.level, job.trial, job.config.seed,
            math.nan, math.nan, math.nan, 0, ERROR_TERMINATION,
            error=f"{type(exc).__name__}: {exc}", wall_s=time.perf_counter() - t0,
        )  # fmt: skip
    return EpisodeResult(
        env=job.env,
        policy=job.policy,
        level=job.level,
        trial=job.trial,
        seed=job.config.seed,
        path_m=m.scout_path_distance_m,
        time_s=m.exploration_time_s,
        coverage_final=m.coverage_final,
        n_transmissions=m.n_transmissions,
        termination=m.termination,
        trace_hash=m.trace_hash,
        transmissions=m.transmissions,
        trace=m.trace,
        wall_s=time.perf_counter() - t0,
    )


def _mean_std(values: list[float]) -> tuple[float, float]:
    if not values:
        return math.nan, math.nan
    mean = statistics.fmean(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, std


def summarize(episodes: list[EpisodeResult]) -> list[SummaryRow]:
    """One row per (env, policy, level) in first-seen order, with best-mean flags per (env, level)."""
    groups: dict[tuple[str, str, int], list[EpisodeResult]] = {}
    for e in episodes:
        groups.setdefault((e.env, e.policy, e.level), []).append(e)
    rows = []
    for (env, policy, level), eps in groups.items():
        used = [e for e in eps if e.ok and e.terminated]
        pm, ps = _mean_std([e.path_m for e in used])
        tm, ts = _mean_std([e.time_s for e in used])
        rows.append(SummaryRow(env, policy, level, len(used), pm, ps, tm, ts, len(eps) - len(used)))
    best_path: dict[tuple[str, int], float] = {}
    best_time: dict[tuple[str, int], float] = {}
    for r in rows:
        k = (r.env, r.level)
        if not math.isnan(r.path_mean_m):
            best_path[k] = min(best_path.get(k, math.inf), r.path_mean_m)
            best_time[k] = min(best_time.get(k, math.inf), r.time_mean_s)
    return [
        replace(
            r,
            best_path=r.path_mean_m == best_path.get((r.env, r.level)),
            best_time=r.time_mean_s == best_time.get((r.env, r.level)),
        )
        for r in rows
    ]


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_rows(path: Path, header: tuple[str, ...], rows: list[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_episodes_csv(path: str | Path, episodes: list[EpisodeResult]) -> None:
    _write_rows(
        Path(path),
        EPISODE_FIELDS,
        [
            (e.env, e.policy, e.level, e.seed, e.path_m, e.time_s, e.coverage_final, e.n_transmissions, e.termination)
            for e in episodes
        ],
    )


def write_summary_csv(path: str | Path, summary: list[SummaryRow]) -> None:
    _write_rows(
        Path(path),
        SUMMARY_FIELDS,
        [
            (r.env, r.policy, r.level, r.n, r.path_mean_m, r.path_std_m, r.time_mean_s, r.time_std_s,
             r.n_excluded, r.single_trial, r.best_path, r.best_time)
            for r in summary
        ],
    )  # fmt: skip


def write_transmissions_csv(path: str | Path, episodes: list[EpisodeResult]) -> None:
    rows = []
    for e in episodes:
        for t in e.transmissions:
            rows.append(
                (e.env, e.policy, e.level, e.seed, t.event, t.in_place, t.fallback, t.delivered,
                 t.target_pose.x, t.target_pose.y, t.realized_rssi_dbm, t.t_transmitting_s,
                 t.backtrack_m, t.return_m, t.signal_distance_m, t.traversal_distance_m)
            )  # fmt: skip
    _write_rows(Path(path), TRANSMISSION_FIELDS, rows)


def read_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# --- heatmaps ----------------------------------------------------------------


def export_heatmap(trace: list[dict], grid: OccupancyGrid) -> np.ndarray:
    """Max logged RSSI per cell the Scout occupied; ``HEATMAP_NODATA`` (NaN) elsewhere.

    Rows follow the grid (row 0 at y = 0).  Cells with only NO_LINK samples hold ``-inf``.
    """
    if not trace:
        raise ValueError("trace is empty; record the episode with record_trace=True")
    out = np.full(grid.shape, HEATMAP_NODATA)
    for row in trace:
        r, c = Pose(row["scout_x"], row["scout_y"]).cell(grid.resolution)
        v = float(row["rssi_dbm"])
        if math.isnan(out[r, c]) or v > out[r, c]:
            out[r, c] = v
    return out


def heatmap_to_pgm_values(raster: np.ndarray) -> np.ndarray:
    """0 = no data, 1 = weakest finite value or NO_LINK, 255 = strongest."""
    out = np.zeros(raster.shape, dtype=np.uint8)
    sampled = ~np.isnan(raster)
    finite = np.isfinite(raster)
    out[sampled] = 1
    if finite.any():
        lo, hi = raster[finite].min(), raster[finite].max()
        span = hi - lo if hi > lo else 1.0
        out[finite] = (1 + np.round((raster[finite] - lo) / span * 254)).astype(np.uint8)
    return out


def write_heatmap(prefix: str | Path, raster: np.ndarray) -> tuple[Path, Path]:
    """Write ``<prefix>.csv`` (top row = max y, ``nan`` = no data) and ``<prefix>.pgm``."""
    prefix = Path(prefix)
    csv_path, pgm_path = prefix.with_suffix(".csv"), prefix.with_suffix(".pgm")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in raster[::-1]:
            w.writerow([repr(float(v)) for v in row])
    write_pgm(pgm_path, heatmap_to_pgm_values(raster))
    return csv_path, pgm_path


# --- sweep -------------------------------------------------------------------


def _execute(jobs: list[Job], workers: int) -> list[EpisodeResult]:
    if workers <= 1 or len(jobs) <= 1:
        return [run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_job, jobs, chunksize=1))


def run_sweep(spec: SweepSpec, write: bool = True) -> SweepResult:
    """Run every configured episode and (optionally) write the CSVs under ``spec.output_dir``.

    Results are buffered and written in job order, so the files do not
    depend on ``workers``.
    """
    spec.validate()
    t0 = time.perf_counter()
    jobs = spec.jobs()
    workers = spec.workers if spec.workers is not None else (os.cpu_count() or 1)
    episodes = _execute(jobs, workers)
    for e in episodes:
        if not e.ok:
            log.error("episode %s/%s/L%d/trial %d failed: %s", e.env, e.policy, e.level, e.trial, e.error)
        elif not e.terminated:
            log.warning(
                "episode %s/%s/L%d/trial %d ended by %s; excluded from means",
                e.env, e.policy, e.level, e.trial, e.termination,
            )  # fmt: skip
    summary = summarize(episodes)
    out_dir = None
    if write:
        out_dir = Path(spec.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_episodes_csv(out_dir / "episodes.csv", episodes)
        write_summary_csv(out_dir / "summary.csv", summary)
        write_transmissions_csv(out_dir / "transmissions.csv", episodes)
        _write_artifacts(spec, out_dir, episodes)
    return SweepResult(episodes, summary, out_dir, time.perf_counter() - t0)


def _write_artifacts(spec: SweepSpec, out_dir: Path, episodes: list[EpisodeResult]) -> None:
    if not (spec.trace or spec.heatmap):
        return
    if spec.heatmap:
        (out_dir / "maps").mkdir(exist_ok=True)
        for env in spec.environments:
            write_pgm(out_dir / "maps" / f"{env}.pgm", grid_to_pgm_values(_environment(env, spec.resolution).grid))
    for e in episodes:
        if not e.ok or not e.trace:
            continue
        stem = f"{e.env}_{e.policy}_L{e.level}_t{e.trial}"
        if spec.trace:
            (out_dir / "traces").mkdir(exist_ok=True)
            write_trace_csv(out_dir / "traces" / f"{stem}.csv", e.trace)
        if spec.heatmap:
            (out_dir / "heatmaps").mkdir(exist_ok=True)
            raster = export_heatmap(e.trace, _environment(e.env, spec.resolution).grid)
            write_heatmap(out_dir / "heatmaps" / stem, raster)


def format_summary(summary: list[SummaryRow]) -> str:
    """Plain-text table; ``*`` marks the lowest mean per environment and level."""
    lines = [f"{'env':10s} {'policy':8s} {'lvl':>3s} {'n':>3s} {'path (m)':>20s} {'time (s)':>20s}"]
    for r in summary:
        p = f"{r.path_mean_m:8.1f} ± {r.path_std_m:5.1f}{'*' if r.best_path else ' '}"
        t = f"{r.time_mean_s:8.1f} ± {r.time_std_s:5.1f}{'*' if r.best_time else ' '}"
        lines.append(f"{r.env:10s} {r.policy:8s} {r.level:3d} {r.n:3d} {p:>20s} {t:>20s}")
    return "\n".join(lines)
