"""Write the synthetic emissions and market fixtures plus a runnable config.

    python3 scripts/make_fixtures.py DIR [--seed N]
    cfpower ingest --config DIR/config.json
    cfpower counterfactual --config DIR/config.json
    cfpower market --config DIR/config.json
    cfpower report --config DIR/config.json
"""

from __future__ import annotations

import argparse
import sys

from cfpower.synthetic import write_config


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("directory")
    ap.add_argument("--seed", type=int, default=0, help="seed recorded in the config")
    args = ap.parse_args(argv)
    print(write_config(args.directory, seed=args.seed))
    return 0


if __name__ == "__main__":
    sys.exit(main())
