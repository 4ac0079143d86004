"""Pointwise versus global exit rates of held-out true-model curves.

Builds one M=600, k_drop=30 envelope per statistic from the macro Strauss
model and tests held-out realisations of the same model against it.
"""
import argparse

import numpy as np

from bspp.core import Window, derive_seed
from bspp.envelope import StatisticOptions, build_envelopes, data_statistic, envelope_test
from bspp.netperf import NetworkConfig
from bspp.presets import MACRO_STRAUSS
from bspp.procsim import McmcConfig, sample_gibbs

STATS = ("L", "Voronoi-CDF", "SIR-CDF")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--held-out", type=int, default=100)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    opts = StatisticOptions(net=NetworkConfig(seed=derive_seed(0, 0)))
    envs = build_envelopes(MACRO_STRAUSS, STATS, Window.unit(), 600, 30, 1, opts, n_jobs=args.jobs)
    frac = {s: [] for s in STATS}
    rejected = {s: 0 for s in STATS}
    any_rej = 0
    for j in range(args.held_out):
        p = sample_gibbs(MACRO_STRAUSS, Window.unit(), McmcConfig(seed=10**6 + j))
        hit = False
        for s in STATS:
            rep = envelope_test(data_statistic(p, s, opts), envs[s])
            frac[s].append(rep.fraction_outside)
            rejected[s] += not rep.inside
            hit |= not rep.inside
        any_rej += hit
    for s in STATS:
        print(f"{s:12s} mean fraction outside {np.mean(frac[s]):.3f}  global rejection {rejected[s] / args.held_out:.2f}")
    print(f"any statistic rejects: {any_rej / args.held_out:.2f}")


if __name__ == "__main__":
    main()
