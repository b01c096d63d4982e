"""Median sup-error of the smoothed solution against the mixed one, for several models and Hurst indices.

No rate is claimed; the output lets one eyeball how fast X^n approaches X.
"""

import argparse
import csv
import sys

import numpy as np

from mixed_sde_lab.models import get_model
from mixed_sde_lab.sde import convergence_study


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--models", nargs="+", default=["trig1d", "tanh2d"])
    ap.add_argument("--H", nargs="+", type=float, default=[0.6, 0.75, 0.9])
    ap.add_argument("--N", type=int, default=4096)
    ap.add_argument("--paths", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    n_list = [8, 16, 32, 64, 128]
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["model", "H", "n", "median", "q25", "q75"])
    for name in args.models:
        model = get_model(name)
        for H in args.H:
            tab = convergence_study(model, np.zeros(model.d), 1.0, args.N, n_list, (args.seed, args.paths), H=H)
            for r in tab.rows:
                w.writerow([name, H, r.n, repr(r.median), repr(r.q25), repr(r.q75)])


if __name__ == "__main__":
    main()
