"""Write the three default environments as PGM images."""

import sys
from pathlib import Path

from commexplore.gridworld import DEFAULT_SPECS, grid_to_pgm_values, make_environment, write_pgm

if __name__ == "__main__":
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "results/maps")
    out.mkdir(parents=True, exist_ok=True)
    for name in DEFAULT_SPECS:
        env = make_environment(name)
        write_pgm(out / f"{name}.pgm", grid_to_pgm_values(env.grid))
        print(name, env.grid.shape, "start", env.start, "events", [e.pose for e in env.events])
