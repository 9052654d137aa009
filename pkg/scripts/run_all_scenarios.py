#!/usr/bin/env python3
"""Run every scenario file in scenarios/ and print a pass/fail summary.

Each scenario gets its own artifact directory under --out
(report.json, rays.csv, jacobi.csv, residuals.csv).  Exits nonzero if
any scenario has a failing check.
"""

import argparse
import sys
from pathlib import Path

from nullrays import cli

ROOT = Path(__file__).resolve().parents[1]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenario-dir", type=Path, default=ROOT / "scenarios")
    ap.add_argument("--out", type=Path, default=ROOT / "out" / "scenarios")
    ap.add_argument("--seed", type=int, default=None,
                    help="override every scenario's seed")
    args = ap.parse_args(argv)

    files = sorted(args.scenario_dir.glob("*.json"))
    if not files:
        print(f"no scenario files in {args.scenario_dir}", file=sys.stderr)
        return 2

    any_failed = False
    print(f"{'scenario':<24} {'kind':<22} {'checks':>6} {'passed':>6} "
          f"{'worst residual':>15}  status")
    for path in files:
        report = cli.run_scenario(path, out_dir=args.out / path.stem,
                                  seed=args.seed)
        worst = max((c["residual"] for c in report["checks"]), default=0.0)
        status = "ok" if report["passed"] else "FAIL"
        any_failed |= not report["passed"]
        print(f"{report['name']:<24} {report['kind']:<22} "
              f"{report['n_checks']:>6} {report['n_passed']:>6} "
              f"{worst:>15.3e}  {status}")
        for c in report["checks"]:
            if not c["passed"]:
                print(f"    FAIL {c['check_id']}: residual={c['residual']:.3e} "
                      f"> tolerance={c['tolerance']:.3e}")

    print(f"\nartifacts under {args.out}")
    return 1 if any_failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
