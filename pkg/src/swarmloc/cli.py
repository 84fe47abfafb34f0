"""Command-line front end: run, bounds, localizability, synth.

Exit codes: 0 success, 1 validation problem (bad config, bad input files),
2 unexpected runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import traceback

from .datamodel import ParseError
from .experiment import (
    bounds_sweep,
    load_config,
    localizability_report,
    run,
    synthesize,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swarmloc",
        description="BitTorrent locality traffic estimation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="experiment config file (INI)")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--out", default=None, help="override the output directory")

    p_run = sub.add_parser("run", help="full policy comparison over the home ISPs")
    common(p_run)

    p_bounds = sub.add_parser("bounds", help="speed-agnostic bound CSV for top ISPs")
    common(p_bounds)
    p_bounds.add_argument("--top", type=int, default=None, help="override top-N ISP count")

    p_loc = sub.add_parser("localizability", help="inherent localizability / speed sweeps")
    common(p_loc)
    p_loc.add_argument("--isp", required=True, help="ISP to score")
    p_loc.add_argument("--q", type=float, default=None, help="speed band half-width")
    p_loc.add_argument("--sweep", default=None, help="speed grid lo:hi:steps")

    p_synth = sub.add_parser("synth", help="emit synthetic demographics/speeds/ratios")
    common(p_synth)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config, seed_override=args.seed, out_override=args.out)
        if args.command == "run":
            result = run(config)
            print(f"wrote {len(result.files)} files to {config.out_dir}")
        elif args.command == "bounds":
            if args.top is not None:
                config = dataclasses.replace(config, top_n=args.top)
            reports = bounds_sweep(config)
            print(f"wrote bounds for {len(reports)} ISPs to {config.out_dir}")
        elif args.command == "localizability":
            sweep = None
            if args.sweep:
                lo, hi, steps = args.sweep.split(":")
                sweep = (float(lo), float(hi), int(steps))
            points = localizability_report(config, args.isp, q=args.q, sweep=sweep)
            print(f"wrote {len(points)} localizability points to {config.out_dir}")
        elif args.command == "synth":
            files = synthesize(config)
            print("wrote " + ", ".join(str(f) for f in files))
    except (ValueError, ParseError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception:
        traceback.print_exc()
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
