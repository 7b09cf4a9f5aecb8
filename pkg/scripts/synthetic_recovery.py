"""Forecast a known trend plus seasonal signal and report how close the GP gets.

    python3 scripts/synthetic_recovery.py [--seeds 20] [--noise 0.02]
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from cfpower.gp import FitConfig, default_kernel, fit, predict


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--noise", type=float, default=0.02, help="noise sd as a fraction of the mean")
    args = ap.parse_args(argv)
    t = np.arange(60.0)
    truth = 100.0 + 0.3 * t + 8.0 * np.sin(2 * np.pi * t / 12)
    sigma = args.noise * truth[:50].mean()
    print("seed  within 1.5 sigma  max |error|/sigma  95% coverage")
    for seed in range(args.seeds):
        y = truth[:50] + np.random.default_rng(seed).normal(0, sigma, 50)
        d = predict(fit(t[:50, None], y, default_kernel(0), FitConfig(seed=seed)), t[50:, None])
        err = np.abs(d.mean - truth[50:])
        covered = np.mean((truth[50:] >= d.ci95_lower) & (truth[50:] <= d.ci95_upper))
        print(f"{seed:4d}  {int(np.sum(err <= 1.5 * sigma)):9d}/10  {err.max() / sigma:17.2f}  {100 * covered:11.0f}%")
    return 0


if __name__ == "__main__":
    sys.exit(main())
