"""Batch spread of E exp(z sup|X|^α) as α approaches 4H/(2H+1).

Logs behaviour near the integrability threshold without asserting anything.
Writes a CSV to stdout: alpha, fraction of alpha_max, pooled, spread, overflow.
"""

import argparse
import csv
import sys

import numpy as np

from mixed_sde_lab.models import get_model
from mixed_sde_lab.moments import alpha_max, estimate_exp_moment, simulate_sup_norms


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--H", type=float, default=0.75)
    ap.add_argument("--model", default="trig1d")
    ap.add_argument("--N", type=int, default=1024)
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--z", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    model = get_model(args.model)
    sups = simulate_sup_norms(model, np.zeros(model.d), H=args.H, T=1.0, N=args.N, n_paths=args.paths, seed=args.seed)
    amax = alpha_max(args.H)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["alpha", "fraction", "pooled", "spread", "overflow"])
    for frac in (0.25, 0.5, 0.75, 0.9, 0.95, 0.99):
        rep = estimate_exp_moment(sups, args.z, frac * amax, batches=4, H=args.H, seed=args.seed)
        w.writerow([repr(frac * amax), frac, repr(rep.pooled), repr(rep.spread), rep.overflow])


if __name__ == "__main__":
    main()
