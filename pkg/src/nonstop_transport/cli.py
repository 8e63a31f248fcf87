"""Command-line entry point: ``nonstop-transport run|compare CONFIG``.

Exit codes: 0 success, 2 invalid config, 3 simulation aborted, 4 optimizer
fallback budget exceeded, 5 determinism check failed.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import load_config
from .errors import ConfigError
from .export import build_summary, write_plotdata, write_summary, write_trace
from .metrics import compute_metrics
from .simulator import OptimizerBudgetExceeded, run_closed_loop

log = logging.getLogger("nonstop_transport")

EXIT_OK, EXIT_CONFIG, EXIT_ABORT, EXIT_BUDGET, EXIT_NONDETERMINISTIC = 0, 2, 3, 4, 5
OUT_ENV = "NONSTOP_TRANSPORT_OUT"
_STATUS_EXIT = {"ok": EXIT_OK, "aborted": EXIT_ABORT, "optimizer_budget_exceeded": EXIT_BUDGET}


def simulate(cfg):
    """Run one scenario; never raises for simulation failures."""
    try:
        trace = run_closed_loop(cfg)
    except OptimizerBudgetExceeded as exc:
        return exc.trace, "optimizer_budget_exceeded"
    return trace, ("aborted" if trace.aborted else "ok")


def _map(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


def write_run(cfg, trace, status, out_dir, label=None):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prec = cfg.output.precision
    write_trace(trace, out_dir / "trace.csv", prec)
    if cfg.output.plotdata:
        write_plotdata(trace, out_dir / "plotdata", prec)
    (out_dir / "config.yaml").write_text(cfg.dumps())
    metrics = compute_metrics(trace, cfg)
    summary = build_summary(status, metrics, cfg, error=trace.error, label=label)
    write_summary(summary, out_dir / "summary.json")
    return summary


def _seed_check(cfg, first_dir, trace_b, status_b):
    check_dir = Path(first_dir) / "seed_check"
    write_run(cfg, trace_b, status_b, check_dir, label="seed_check")
    a = (Path(first_dir) / "trace.csv").read_bytes()
    b = (check_dir / "trace.csv").read_bytes()
    same = a == b
    print(f"seed-check {'PASS' if same else 'FAIL'}: {len(a)} vs {len(b)} bytes "
          f"({Path(first_dir) / 'trace.csv'})")
    return same


def _fmt(v, spec=".4f"):
    return "n/a" if v is None else format(v, spec)


def _print_run(summary, out_dir):
    m = summary["metrics"]
    print(f"status={summary['status']} ticks={m['ticks']} out={out_dir}")
    print(f"  mean |e_p| {_fmt(m['mean_e_p'])} m   mean |e_R| {_fmt(m['mean_e_R'])}")
    print(f"  min speed desired {_fmt(m['min_speed_desired'])} m/s   "
          f"realized {_fmt(m['min_speed_realized'])} m/s")
    print(f"  tension [{_fmt(m['tension_min'], '.3f')}, {_fmt(m['tension_max'], '.3f')}] N   "
          f"fallbacks {m['fallback_count']}/{m['optimizer_calls']}")
    if summary["error"]:
        print(f"  error: {summary['error']}")


def _delta(a, b):
    return None if a is None or b is None else b - a


def comparison(off, on):
    rows = ["mean_e_p", "max_e_p", "mean_e_R", "max_e_R", "min_speed_desired",
            "min_speed_realized", "negative_margin_fraction", "tension_min", "tension_max",
            "fallback_count"]
    mo, mn = off["metrics"], on["metrics"]
    table = {r: {"off": mo[r], "on": mn[r], "delta": _delta(mo[r], mn[r])} for r in rows}
    return {
        "version": __version__,
        "status": {"off": off["status"], "on": on["status"]},
        "metrics": table,
        "delta_mean_e_p": table["mean_e_p"]["delta"],
        "delta_min_speed": table["min_speed_desired"]["delta"],
    }


def comparison_text(cmp):
    lines = [f"{'metric':<28}{'optimizer off':>16}{'optimizer on':>16}{'delta':>14}"]
    for name, row in cmp["metrics"].items():
        lines.append(f"{name:<28}{_fmt(row['off'], '.6g'):>16}{_fmt(row['on'], '.6g'):>16}"
                     f"{_fmt(row['delta'], '+.6g'):>14}")
    return "\n".join(lines)


def _out_root(args, cfg_path, suffix=""):
    if args.out:
        return Path(args.out)
    root = Path(os.environ.get(OUT_ENV, "runs"))
    return root / (Path(cfg_path).stem + suffix)


def cmd_run(args, cfg):
    out = _out_root(args, args.config)
    n = 2 if args.seed_check else 1
    results = _map(simulate, [cfg] * n, args.jobs)
    trace, status = results[0]
    summary = write_run(cfg, trace, status, out)
    _print_run(summary, out)
    code = _STATUS_EXIT[status]
    if args.seed_check and not _seed_check(cfg, out, *results[1]):
        code = code or EXIT_NONDETERMINISTIC
    return code


def cmd_compare(args, cfg):
    out = _out_root(args, args.config, "_compare")
    off_cfg = replace(cfg, optimizer=replace(cfg.optimizer, enabled=False))
    on_cfg = replace(cfg, optimizer=replace(cfg.optimizer, enabled=True))
    cfgs = [off_cfg, on_cfg] * (2 if args.seed_check else 1)
    results = _map(simulate, cfgs, args.jobs)
    summaries = {}
    for label, c, (trace, status) in zip(("off", "on"), cfgs, results):
        summaries[label] = write_run(c, trace, status, out / label, label=label)
    cmp = comparison(summaries["off"], summaries["on"])
    text = comparison_text(cmp)
    (out / "compare.json").write_text(json.dumps(cmp, indent=2, allow_nan=False) + "\n")
    (out / "compare.txt").write_text(text + "\n")
    print(text)
    print(json.dumps({"delta_mean_e_p": cmp["delta_mean_e_p"],
                      "delta_min_speed": cmp["delta_min_speed"]}))
    code = max(_STATUS_EXIT[s["status"]] for s in summaries.values())
    if args.seed_check:
        same = all(_seed_check(c, out / label, *res)
                   for label, c, res in zip(("off", "on"), cfgs[2:], results[2:]))
        if not same:
            code = code or EXIT_NONDETERMINISTIC
    return code


def build_parser():
    p = argparse.ArgumentParser(prog="nonstop-transport",
                                description="Cable-suspended load transport by non-stopping carriers.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "simulate one scenario"),
                        ("compare", "simulate with the optimizer off and on")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("config", help="scenario YAML file (may be empty)")
        s.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<config stem> or runs/)")
        s.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted config override, value parsed as YAML; repeatable")
        s.add_argument("--seed-check", action="store_true",
                       help="rerun and require byte-identical trace.csv")
        s.add_argument("--jobs", type=int, default=None,
                       help="worker processes (default: available cores, at most 2)")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.jobs is None:
        args.jobs = min(2, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity")
                        else os.cpu_count() or 1)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.override)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "run":
        return cmd_run(args, cfg)
    return cmd_compare(args, cfg)


if __name__ == "__main__":
    sys.exit(main())
