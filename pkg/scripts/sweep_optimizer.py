"""Sensitivity of the speed floor to optimizer settings.

Each row reruns the reference scenario with the optimizer enabled and one
combination of objective weights and constraint look-ahead, then reports
the minimum desired and realized carrier speeds and the mean position error.

    python scripts/sweep_optimizer.py --out runs/sweep.csv
"""
import argparse
import csv
import itertools
import sys
import time
from pathlib import Path

from nonstop_transport.config import load_config
from nonstop_transport.metrics import compute_metrics
from nonstop_transport.simulator import run_closed_loop

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "paper_reproduction.yaml"))
    ap.add_argument("--out", default="runs/sweep.csv")
    ap.add_argument("--weights", default="1:0.1,10:1,0.1:0.01",
                    help="comma-separated w_pos:w_vel pairs")
    ap.add_argument("--lookahead", default="none,hold")
    args = ap.parse_args()

    base = load_config(args.config)
    weights = [tuple(float(x) for x in p.split(":")) for p in args.weights.split(",")]
    modes = args.lookahead.split(",")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fields = ["w_pos", "w_vel", "lookahead", "min_speed_desired", "min_speed_realized",
              "mean_e_p", "mean_e_R", "fallbacks", "seconds"]
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for (wp, wv), mode in itertools.product(weights, modes):
            cfg = base.with_overrides([f"optimizer.w_pos={wp}", f"optimizer.w_vel={wv}",
                                       f"optimizer.lookahead={mode}", "optimizer.enabled=true"])
            t0 = time.perf_counter()
            m = compute_metrics(run_closed_loop(cfg), cfg)
            row = [wp, wv, mode, m.min_speed_desired, m.min_speed_realized, m.mean_e_p, m.mean_e_R,
                   m.fallback_count, round(time.perf_counter() - t0, 1)]
            writer.writerow(row)
            fh.flush()
            print(" ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}"
                           for k, v in zip(fields, row)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
