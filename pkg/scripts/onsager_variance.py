"""BAMP with the Gaussian prior, using either the conditional variance or the
closed-form G = beta*M + m in the Onsager term. Prints mean NMSE for each.

    python3 scripts/onsager_variance.py --m 590 --snr 25 --realizations 20
"""
import argparse

import numpy as np

from bossamp import metrics
from bossamp.model import derive_seed, make_instance
from bossamp.recover import DivergenceError, bamp


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--k", type=int, default=160)
    p.add_argument("--m", type=int, default=590)
    p.add_argument("--snr", type=float, default=25.0)
    p.add_argument("--realizations", type=int, default=20)
    p.add_argument("--seed", type=int, default=1)
    args = p.parse_args()

    res = {"posterior": [], "printed": []}
    for r in range(args.realizations):
        inst = make_instance(args.m, args.n, args.k, 1, "SparseGaussian", args.snr, derive_seed(args.seed, r))
        for variance in res:
            try:
                x = bamp(inst.y, inst.a, inst.prior, variance=variance).x_hat
                res[variance].append(metrics.nmse(inst.x_true, x))
            except DivergenceError:
                res[variance].append(np.inf)
    for variance, v in res.items():
        print(f"{variance:>10}: mean NMSE {metrics.to_db(np.mean(v)):7.2f} dB")


if __name__ == "__main__":
    main()
