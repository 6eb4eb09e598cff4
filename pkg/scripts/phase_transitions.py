"""Desk-scale phase transitions for AMP, BAMP and BOSSAMP on the same instances.

Writes each grid and its 0.5 contour, then prints the success areas and how
often the expected ordering BOSSAMP >= BAMP >= AMP is violated.

    python3 scripts/phase_transitions.py --n 256 --realizations 50 --out results/
"""
import argparse
from pathlib import Path

import numpy as np

from bossamp import bench


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--group-size", type=int, default=2)
    p.add_argument("--prior", default="SparseBinary")
    p.add_argument("--realizations", type=int, default=50)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default="results")
    args = p.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grids = {}
    for alg in ("Amp", "Bamp", "BossampGroup"):
        config = bench.ExperimentConfig(
            family="PhaseTransition", algorithm=alg, prior_kind=args.prior, n=args.n,
            group_size=args.group_size, realizations=args.realizations, master_seed=args.seed,
        )
        grid = bench.run_phase_transition(config, args.threads)
        path = out / f"pt_{args.prior}_n{args.n}_{alg}.csv"
        bench.write_csv(grid.table(), path)
        bench.write_contour_csv(grid.contour(), bench.contour_path(path))
        grids[alg] = grid
        print(f"{alg:>14}: success area {grid.area():.3f}")

    a, b, c = (grids[k].success for k in ("Amp", "Bamp", "BossampGroup"))
    print(f"cells with BAMP < AMP: {int(np.sum(b < a))}, BOSSAMP < BAMP: {int(np.sum(c < b))}, "
          f"BOSSAMP > AMP: {np.mean(c > a):.2f}")


if __name__ == "__main__":
    main()
