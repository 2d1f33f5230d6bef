#!/usr/bin/env python3
"""Run the full acceptance suite on a configuration and print the report.

Usage: python scripts/run_verify.py [--config configs/default.yaml]
                                    [--out out/verify] [--workers N]
"""

import argparse
import os
import sys
from pathlib import Path

from eivreg import cli

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(ROOT / "configs" / "default.yaml"))
    ap.add_argument("--out", default=str(ROOT / "out" / "verify"))
    ap.add_argument("--workers", default=str(os.cpu_count() or 1))
    args = ap.parse_args()
    return cli.main(["verify", "--config", args.config, "--out", args.out,
                     "--workers", args.workers])


if __name__ == "__main__":
    sys.exit(main())
