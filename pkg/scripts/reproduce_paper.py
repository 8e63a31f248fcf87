"""Run the four-carrier study with the optimizer off and on and print the comparison.

    python scripts/reproduce_paper.py --out runs/paper

Writes the same files as ``nonstop-transport compare`` and additionally
prints the per-phase minimum desired carrier speeds.
"""
import argparse
import json
import sys
from pathlib import Path

from nonstop_transport import cli

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "paper_reproduction.yaml"))
    ap.add_argument("--out", default="runs/paper")
    ap.add_argument("--jobs", type=int, default=None)
    args = ap.parse_args()

    argv = ["compare", args.config, "--out", args.out]
    if args.jobs is not None:
        argv += ["--jobs", str(args.jobs)]
    code = cli.main(argv)
    out = Path(args.out)
    print("\nminimum desired carrier speed per phase [m/s]")
    for label in ("off", "on"):
        m = json.loads((out / label / "summary.json").read_text())["metrics"]
        phases = "  ".join(f"{k}={v:.3f}" for k, v in m["phase_min_speed_desired"].items())
        print(f"  optimizer {label:<3}  {phases}")
        print(f"  {'':13} final hold |e_p| {m['final_hold_e_p_start']:.4f} -> "
              f"{m['final_hold_e_p_end']:.5f} m")
    return code


if __name__ == "__main__":
    sys.exit(main())
