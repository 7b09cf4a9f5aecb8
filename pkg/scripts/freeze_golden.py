"""Freeze the expected counterfactual outputs for the shipped golden fixture.

Run once after the GP oracle, gradient, recovery and calibration checks
pass; the result is committed as tests/data/golden/expected.json and the
acceptance suite compares later runs against it.

    python3 scripts/freeze_golden.py [--check]
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from cfpower.counterfactual import (FUEL_TARGETS, HEADLINE_TARGETS, ExperimentSpec, fuel_split_table,
                                    run_experiment)
from cfpower.gp import FitConfig
from cfpower.ingest import run_ingest

GOLDEN = Path(__file__).resolve().parents[1] / "tests" / "data" / "golden"


def golden_outputs(seed: int = 0) -> dict:
    bundle, _ = run_ingest(GOLDEN / "generation.csv", GOLDEN / "factors.csv", GOLDEN / "degree_days.csv",
                           ("2016-01", "2020-12"))
    cfg = FitConfig(seed=seed)
    results = {t: run_experiment(bundle, ExperimentSpec(t, fit_config=cfg))
               for t in HEADLINE_TARGETS + FUEL_TARGETS}
    return {
        "seed": seed,
        "reports": {t: results[t].report.to_dict() for t in HEADLINE_TARGETS},
        "fuel_split": fuel_split_table({f: results[f] for f in FUEL_TARGETS}),
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--check", action="store_true", help="compare against the frozen file instead of writing")
    args = ap.parse_args(argv)
    out = GOLDEN / "expected.json"
    doc = golden_outputs()
    text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if args.check:
        same = out.exists() and out.read_text() == text
        print("golden outputs unchanged" if same else "golden outputs differ from the frozen file")
        return 0 if same else 1
    out.write_text(text)
    for t, rep in doc["reports"].items():
        print(f"{t:9s} significant: {', '.join(rep['significant_months']) or 'none'}")
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
