"""Mean point count of Strauss(beta, 0.3547, 0.085) on the unit square for a few beta values.

Used to choose the macro-tier beta giving about 77 points.
"""
import argparse

import numpy as np

from bspp.core import Window
from bspp.procsim import GibbsModel, McmcConfig, sample_gibbs


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--betas", type=float, nargs="+", default=[240, 250, 255, 260, 270])
    ap.add_argument("--chains", type=int, default=400)
    args = ap.parse_args()
    for beta in args.betas:
        m = GibbsModel.strauss(beta, 0.3547, 0.085)
        n = np.array([sample_gibbs(m, Window.unit(), McmcConfig(seed=s)).n for s in range(args.chains)])
        print(f"beta={beta:7.2f}  mean n={n.mean():6.2f}  se={n.std(ddof=1) / np.sqrt(len(n)):.2f}")


if __name__ == "__main__":
    main()
