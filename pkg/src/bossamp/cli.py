"""Command line entry point: ``bossamp-bench {variable-snr,variable-m,phase-transition}``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import bench

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2

FAMILIES = {
    "variable-snr": bench.Family.VARIABLE_SNR,
    "variable-m": bench.Family.VARIABLE_M,
    "phase-transition": bench.Family.PHASE_TRANSITION,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bossamp-bench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in FAMILIES:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML experiment config")
        p.add_argument("--out", required=True, help="CSV output path")
        p.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
        p.add_argument("--seed", type=int, default=None, help="override master_seed from the config")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    log = logging.getLogger("bossamp.cli")
    if args.threads < 1:
        log.error("--threads must be at least 1")
        return EXIT_CONFIG
    family = FAMILIES[args.command]
    try:
        config = bench.load_config(args.config, family=family, seed=args.seed)
    except bench.ConfigError as e:
        log.error("%s", e)
        return EXIT_CONFIG

    if family is bench.Family.PHASE_TRANSITION:
        grid = bench.run_phase_transition(config, args.threads)
        table = grid.table()
        bench.write_csv(table, args.out)
        cpath = bench.write_contour_csv(grid.contour(), bench.contour_path(args.out))
        log.info("wrote %s and %s", args.out, cpath)
    else:
        table = bench.run_experiment(config, args.threads)
        bench.write_csv(table, args.out)
        log.info("wrote %s", args.out)
    if table.diverged:
        log.error("%d realization(s) diverged and were excluded from the means", table.diverged)
        return EXIT_DIVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
