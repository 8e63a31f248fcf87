"""CSV/JSON writers for simulation results."""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__

PLOT_SERIES = {
    "desired_trajectory": lambda n: ["t", "ref_x", "ref_y", "ref_z", "ref_vx", "ref_vy", "ref_vz"],
    "load_path": lambda n: ["t", "load_x", "load_y", "load_z", "ref_x", "ref_y", "ref_z"],
    "carrier_paths": lambda n: ["t"] + [f"c{i}_{a}" for i in range(1, n + 1) for a in "xyz"],
    "carrier_speeds": lambda n: ["t"] + [f"c{i}_{s}" for i in range(1, n + 1)
                                         for s in ("speed", "dspeed", "pspeed")],
    "position_error": lambda n: ["t", "e_p_norm", "e_px", "e_py", "e_pz"],
    "orientation_error": lambda n: ["t", "e_R_norm", "e_Rx", "e_Ry", "e_Rz"],
    "tensions": lambda n: ["t"] + [f"c{i}_{s}" for i in range(1, n + 1) for s in ("T", "Td")],
    "internal_params": lambda n: ["t", "xi", "A", "opt_ran", "opt_feasible", "opt_fallback"],
}


def _write_csv(path, columns, data, precision):
    fmt = f"%.{int(precision)}g"
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        if data.size:
            np.savetxt(fh, data, fmt=fmt, delimiter=",")


def write_trace(trace, path, precision=9):
    _write_csv(path, trace.columns, trace.array(), precision)


def write_plotdata(trace, directory, precision=9):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    A = trace.array()
    written = []
    for name, cols in PLOT_SERIES.items():
        names = cols(trace.n)
        idx = [trace.columns.index(c) for c in names]
        path = directory / f"{name}.csv"
        _write_csv(path, names, A[:, idx], precision)
        written.append(path)
    return written


def summary_schema():
    text = resources.files("nonstop_transport").joinpath("schemas/summary.schema.json").read_text()
    return json.loads(text)


def build_summary(status, metrics, cfg, error=None, label=None):
    return {
        "artifact": "nonstop_transport",
        "version": __version__,
        "label": label,
        "status": status,
        "failed": status != "ok",
        "error": error,
        "metrics": metrics.to_dict(),
        "config": cfg.to_dict(),
    }


def write_summary(summary, path):
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=False, allow_nan=False) + "\n")
