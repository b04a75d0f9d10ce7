"""One traced ART episode in the window map: writes the RSSI heatmap and prints where it transmitted."""

import argparse
from pathlib import Path

from commexplore.gridworld import grid_to_pgm_values, make_environment, write_pgm
from commexplore.harness import export_heatmap, write_heatmap
from commexplore.sim import EpisodeConfig, run_episode, write_trace_csv

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--env", default="window")
    ap.add_argument("--level", type=int, default=2)
    ap.add_argument("--out", default="results/heatmap")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    env = make_environment(args.env)
    m = run_episode(EpisodeConfig(tx_level=args.level, record_trace=True), env)
    write_trace_csv(out / "trace.csv", m.trace)
    write_pgm(out / "map.pgm", grid_to_pgm_values(env.grid))
    write_heatmap(out / "rssi", export_heatmap(m.trace, env.grid))
    for t in m.transmissions:
        print(
            f"{t.event}: tx at ({t.target_pose.x:.2f}, {t.target_pose.y:.2f}) in_place={t.in_place} "
            f"rssi={t.realized_rssi_dbm:.1f} dBm signal path {t.signal_distance_m:.1f} m "
            f"vs traversal {t.traversal_distance_m:.1f} m"
        )
    print(f"path {m.scout_path_distance_m:.1f} m, time {m.exploration_time_s:.1f} s -> {out}")
