"""Run one sweep config for several algorithms and print the curves side by side.

    python3 scripts/compare_algorithms.py configs/variable_m_binary.yaml \
        --variants Amp:1 Bamp:1 BossampGroup:2 BossampGroup:8 --out results/
"""
import argparse
import dataclasses
from pathlib import Path

from bossamp import bench


def main():
    p = argparse.ArgumentParser()
    p.add_argument("config")
    p.add_argument("--variants", nargs="+", default=["Amp:1", "Bamp:1", "BossampGroup:2", "BossampGroup:8"],
                   help="algorithm:group_size pairs")
    p.add_argument("--out", default="results")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--realizations", type=int, default=None)
    args = p.parse_args()

    base = bench.load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tables = {}
    for v in args.variants:
        alg, gs = v.split(":")
        kw = dict(algorithm=alg, group_size=int(gs))
        if args.realizations:
            kw["realizations"] = args.realizations
        config = dataclasses.replace(base, **kw)
        table = bench.run_experiment(config, args.threads)
        bench.write_csv(table, out / f"{Path(args.config).stem}_{alg}_g{gs}.csv")
        tables[v] = table

    sweep = next(iter(tables.values())).columns[0]
    print(f"{sweep:>8} " + " ".join(f"{v:>22}" for v in tables))
    for i, row in enumerate(next(iter(tables.values())).rows):
        cells = []
        for t in tables.values():
            r = t.rows[i]
            cells.append(f"{r['mean_nmse_db']:8.2f} dB S={r['avg_success']:.2f}")
        print(f"{row[sweep]:>8} " + " ".join(f"{c:>22}" for c in cells))


if __name__ == "__main__":
    main()
