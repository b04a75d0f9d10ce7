"""Full 3 env x 4 policy x 4 level x 10 trial sweep; prints the summary table."""

import argparse
import logging
from pathlib import Path

from commexplore.harness import SweepSpec, format_summary, run_sweep

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=str(ROOT / "configs" / "default_sweep.json"))
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)
    spec = SweepSpec.from_json(args.config)
    spec.workers = args.workers
    result = run_sweep(spec)
    print(format_summary(result.summary))
    print(f"{len(result.episodes)} episodes, {result.n_errors} errors, {result.elapsed_s:.1f} s")
