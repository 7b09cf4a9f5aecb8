"""False-positive rate of the 95% significance rule on simulated pandemic-free data.

Fits each target on the golden fixture, simulates new training and forecast
series from the fitted model, refits and counts flagged forecast months.

    python3 scripts/calibration_study.py [--trials 200] [--seed 0]
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from cfpower.counterfactual import HEADLINE_TARGETS, ExperimentSpec, calibration_trials, design_matrix, run_experiment
from cfpower.ingest import run_ingest

GOLDEN = Path(__file__).resolve().parents[1] / "tests" / "data" / "golden"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    bundle, _ = run_ingest(GOLDEN / "generation.csv", GOLDEN / "factors.csv", GOLDEN / "degree_days.csv",
                           ("2016-01", "2020-12"))
    print("target     months  rate   trials<=2 flagged")
    for target in HEADLINE_TARGETS:
        spec = ExperimentSpec(target)
        res = run_experiment(bundle, spec)
        flags = calibration_trials(res.model, design_matrix(bundle, spec.train_months, spec.covariates),
                                   design_matrix(bundle, spec.forecast_months, spec.covariates),
                                   n_trials=args.trials, seed=args.seed)
        per_trial = flags.sum(axis=1)
        print(f"{target:9s} {flags.size:7d}  {100 * flags.mean():4.1f}%  {100 * np.mean(per_trial <= 2):5.1f}%")
    return 0


if __name__ == "__main__":
    sys.exit(main())
