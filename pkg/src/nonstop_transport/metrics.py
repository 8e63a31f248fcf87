"""Scalar summaries of a simulation trace."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass(frozen=True)
class Phase:
    name: str
    t0: float
    t1: float


def trajectory_phases(cfg):
    """Split the reference into named windows.

    A quintic move has its peak speed at mid-duration, so the first half is
    labelled ``accel`` and the second ``decel``.
    """
    phases, t = [], 0.0
    for k, seg in enumerate(cfg.trajectory.segments):
        if seg.kind == "hold":
            phases.append(Phase(f"hold{k}", t, t + seg.duration))
        else:
            mid = t + 0.5 * seg.duration
            phases.append(Phase(f"move{k}_accel", t, mid))
            phases.append(Phase(f"move{k}_decel", mid, t + seg.duration))
        t += seg.duration
    return phases


def _f(x):
    x = float(x)
    return x if math.isfinite(x) else None


@dataclass
class MetricsReport:
    ticks: int
    duration: float
    mean_e_p: float | None
    max_e_p: float | None
    mean_e_R: float | None
    max_e_R: float | None
    min_speed_desired: float | None
    min_speed_realized: float | None
    min_speed_predicted: float | None
    min_speed_desired_per_carrier: list
    min_speed_realized_per_carrier: list
    negative_margin_fraction: float | None
    fallback_count: int
    optimizer_calls: int
    tension_min: float | None
    tension_max: float | None
    phase_min_speed_desired: dict = field(default_factory=dict)
    final_hold_e_p_start: float | None = None
    final_hold_e_p_end: float | None = None

    def to_dict(self):
        return asdict(self)


def compute_metrics(trace, cfg=None):
    A = trace.array()
    ticks = A.shape[0]
    if ticks == 0:
        n = trace.n
        return MetricsReport(0, 0.0, None, None, None, None, None, None, None, [None] * n,
                             [None] * n, None, trace.fallback_count, trace.optimizer_calls,
                             None, None)
    t = trace.col("t")
    ep = trace.col("e_p_norm")
    eR = trace.col("e_R_norm")
    dspeed = trace.carrier_cols("dspeed")
    speed = trace.carrier_cols("speed")
    pspeed = trace.carrier_cols("pspeed")
    T = trace.carrier_cols("T")
    margin = trace.carrier_cols("margin")

    phase_min = {}
    hold_start = hold_end = None
    if cfg is not None:
        phases = trajectory_phases(cfg)
        for ph in phases:
            sel = (t >= ph.t0 - 1e-9) & (t <= ph.t1 + 1e-9)
            if sel.any():
                phase_min[ph.name] = _f(dspeed[sel].min())
        last = cfg.trajectory.segments[-1] if cfg.trajectory.segments else None
        if last is not None and last.kind == "hold" and not trace.aborted:
            i0 = int(np.searchsorted(t, phases[-1].t0 - 1e-9))
            if i0 < ticks:
                hold_start, hold_end = _f(ep[i0]), _f(ep[-1])

    return MetricsReport(
        ticks=ticks,
        duration=float(t[-1]),
        mean_e_p=_f(ep.mean()),
        max_e_p=_f(ep.max()),
        mean_e_R=_f(eR.mean()),
        max_e_R=_f(eR.max()),
        min_speed_desired=_f(dspeed.min()),
        min_speed_realized=_f(speed.min()),
        min_speed_predicted=_f(pspeed.min()),
        min_speed_desired_per_carrier=[_f(v) for v in dspeed.min(axis=0)],
        min_speed_realized_per_carrier=[_f(v) for v in speed.min(axis=0)],
        negative_margin_fraction=_f(np.mean(np.any(margin < 0.0, axis=1))),
        fallback_count=int(trace.fallback_count),
        optimizer_calls=int(trace.optimizer_calls),
        tension_min=_f(T.min()),
        tension_max=_f(T.max()),
        phase_min_speed_desired=phase_min,
        final_hold_e_p_start=hold_start,
        final_hold_e_p_end=hold_end,
    )
