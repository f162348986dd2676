#!/usr/bin/env python3
"""Run the full geometric verification suites and collect the reports.

Drives the CLI so the artifacts are exactly the shipped ones: the
Eguchi-Hanson identity suite, the two-center ansatz suite, and the
ansatz variant with a nonzero potential constant (which skips the
identification check).
"""

import argparse
import sys
from pathlib import Path

from kummerflat import cli


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("artifacts/verification"))
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    runs = [
        ("eguchi-hanson", ["verify-eh", "--seed", str(args.seed),
                           "--out", str(args.out / "eh")]),
        ("two-center", ["verify-gh", "--seed", str(args.seed),
                        "--out", str(args.out / "gh")]),
        ("two-center eps=1", ["verify-gh", "--eps-gh", "1.0", "--seed", str(args.seed),
                              "--out", str(args.out / "gh_eps1")]),
    ]
    worst = 0
    for label, argv_cmd in runs:
        print(f"== {label} ==")
        status = cli.main(argv_cmd)
        worst = max(worst, status)
        print()
    print("verification", "passed" if worst == 0 else "FAILED")
    return worst


if __name__ == "__main__":
    sys.exit(main())
