"""Run every configs/accNN_*.cfg, append records under results/ and print a verdict table."""
import argparse
import sys
from pathlib import Path

from plab.cli import load_config, report, run
from plab.rng import set_threads

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default=str(ROOT / "results"))
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--only", nargs="*", help="config stems to run")
    args = ap.parse_args()
    set_threads(args.threads)
    cfgs = sorted((ROOT / "configs").glob("acc*.cfg"))
    if args.only:
        cfgs = [c for c in cfgs if c.stem in args.only]
    failed = 0
    for path in cfgs:
        rec = run(load_config(path), args.out_dir)
        bad = [c["name"] for c in rec.checks if not c["passed"]]
        failed += bool(bad)
        print(f"{'PASS' if not bad else 'FAIL'}  {path.stem:28s} {rec.seconds:7.1f}s"
              + (f"  failing: {', '.join(bad)}" if bad else ""))
    print()
    report(sorted(Path(args.out_dir).glob("*.jsonl")))
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
