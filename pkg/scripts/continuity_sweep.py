"""Entropy along r in {0.02, ..., 0.1} with bounds; writes the CSV and plot-data files."""
import argparse
from pathlib import Path

from plab.cli import load_config, report, run
from plab.rng import set_threads

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(ROOT / "configs" / "sweep_continuity.cfg"))
    ap.add_argument("--out-dir", default=str(ROOT / "results" / "sweep"))
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    set_threads(args.threads)
    cfg = load_config(args.config)
    rec = run(cfg, args.out_dir)
    for flag in rec.results["continuity"]:
        mark = "FLAG" if flag["flag"] else "ok"
        print(f"r {flag['r0']:.2f} -> {flag['r1']:.2f}: |dh| = {flag['diff']:.2e} "
              f"(allowed {flag['allowed']:.2e}) {mark}")
    report([Path(args.out_dir) / f"{Path(cfg.source).stem}.jsonl"], args.out_dir)
