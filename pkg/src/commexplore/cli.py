"""Command-line entry point: ``commexplore`` / ``python -m commexplore``."""

from __future__ import annotations

import argparse
import logging
import sys

from .harness import SweepSpec, format_summary, run_sweep


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="commexplore", description="Run Scout/Specialist exploration sweeps.")
    p.add_argument("--config", help="JSON file with SweepSpec fields; flags below override it")
    p.add_argument("--env", type=_csv_list, help="comma-separated environments (tunnel,window,yjunction)")
    p.add_argument("--algo", type=_csv_list, help="comma-separated policies (ART,ART-SST,MSSC,FRC)")
    p.add_argument("--tx-level", type=_csv_list, help="comma-separated payload levels 0-3")
    p.add_argument("--seed", type=int, help="master seed that per-episode seeds derive from")
    p.add_argument("--runs", type=int, help="trials per configuration")
    p.add_argument("--out", help="output directory")
    p.add_argument("--trace", action="store_true", default=None, help="write per-tick trace CSVs")
    p.add_argument("--heatmap", action="store_true", default=None, help="write RSSI heatmaps and map PGMs")
    p.add_argument("--workers", type=int, help="worker processes (default: all cores, 1 = serial)")
    p.add_argument("-q", "--quiet", action="store_true", help="do not print the summary table")
    return p


def spec_from_args(args: argparse.Namespace) -> SweepSpec:
    data = {}
    if args.config:
        spec = SweepSpec.from_json(args.config)
        data = {k: getattr(spec, k) for k in spec.__dataclass_fields__}
    overrides = {
        "environments": args.env,
        "policies": args.algo,
        "tx_levels": [int(v) for v in args.tx_level] if args.tx_level else None,
        "master_seed": args.seed,
        "seeds": args.runs,
        "output_dir": args.out,
        "trace": args.trace,
        "heatmap": args.heatmap,
        "workers": args.workers,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    return SweepSpec.from_dict(data)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        spec = spec_from_args(args)
        spec.validate()
    except (ValueError, TypeError, OSError) as exc:
        print(f"commexplore: {exc}", file=sys.stderr)
        return 2
    result = run_sweep(spec)
    if not args.quiet:
        print(format_summary(result.summary))
        print(f"{len(result.episodes)} episodes in {result.elapsed_s:.1f} s -> {result.output_dir}")
    return result.exit_code
