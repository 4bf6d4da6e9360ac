#!/usr/bin/env python3
"""Run the synthetic sweeps and write CSV, JSON summary and curve tables.

    python scripts/run_sweeps.py                      # all three, 30 trials
    python scripts/run_sweeps.py deformation --trials 100 --jobs 8
"""

import argparse
import sys
from pathlib import Path

from mlfgm import cli

HERE = Path(__file__).resolve().parent


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("kinds", nargs="*", default=["deformation", "outlier", "attributes"])
    p.add_argument("--trials", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--outdir", default="results")
    args = p.parse_args()
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    status = 0
    for kind in args.kinds:
        argv = ["bench", "--config", str(HERE / "configs" / f"{kind}.json"),
                "--out", str(outdir / f"{kind}.csv"), "--jobs", str(args.jobs), "--timing"]
        if args.trials:
            argv += ["--trials", str(args.trials)]
        print(f"== {kind}")
        status = max(status, cli.main(argv))
    return status


if __name__ == "__main__":
    sys.exit(main())
