"""Run (or resume) a distance sweep for one trap state and print the fit report.

    python3 scripts/run_sweep.py configs/acceptance.yaml --n 1 --workers 2
"""
import argparse
import json
import os
from pathlib import Path

from softguide.cli import WORKERS_ENV, cmd_sweep
from softguide.config import load_config


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config", type=Path)
    ap.add_argument("--n", type=int, default=1)
    ap.add_argument("--out", type=Path)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    os.environ[WORKERS_ENV] = str(args.workers)
    config = load_config(args.config)
    report = cmd_sweep(config, n=args.n, out=args.out, formats=("csv",))
    print(json.dumps(report, indent=2, default=str))


if __name__ == "__main__":
    main()
