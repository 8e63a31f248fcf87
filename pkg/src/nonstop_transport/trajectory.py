"""Piecewise hold / minimum-jerk move references for the load."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .so3 import expm_so3, is_rotation


@dataclass(frozen=True)
class DesiredLoadSample:
    p: np.ndarray
    v: np.ndarray
    a: np.ndarray
    R: np.ndarray
    omega: np.ndarray  # world frame


@dataclass(frozen=True)
class Hold:
    duration: float


@dataclass(frozen=True)
class Move:
    target: tuple
    duration: float
    rotvec: tuple = (0.0, 0.0, 0.0)  # body-axis rotation applied over the segment


def quintic(s):
    """Minimum-jerk blend on [0, 1]: value and first two derivatives w.r.t. s."""
    s = min(max(s, 0.0), 1.0)
    return (10 * s**3 - 15 * s**4 + 6 * s**5,
            30 * s**2 - 60 * s**3 + 30 * s**4,
            60 * s - 180 * s**2 + 120 * s**3)


@dataclass(frozen=True)
class TrajectorySpec:
    segments: tuple
    initial_position: tuple = (0.0, 0.0, 0.0)
    initial_attitude: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        if not self.segments:
            raise ValueError("trajectory needs at least one segment")
        for seg in self.segments:
            if not seg.duration > 0:
                raise ValueError(f"segment durations must be positive: {seg}")
        R0 = np.asarray(self.initial_attitude, dtype=float)
        if not is_rotation(R0, tol=1e-9):
            raise ValueError("initial attitude is not a rotation matrix")
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "initial_attitude", R0)

    @property
    def duration(self):
        return sum(s.duration for s in self.segments)

    def boundaries(self):
        """Start time, end time and segment object for every segment."""
        out, t = [], 0.0
        for seg in self.segments:
            out.append((t, t + seg.duration, seg))
            t += seg.duration
        return out


def sample(spec, t):
    if not spec.segments:
        raise ValueError("empty trajectory")
    if t < 0:
        raise ValueError("t must be nonnegative")
    p = np.asarray(spec.initial_position, dtype=float).copy()
    R = spec.initial_attitude.copy()
    zero = np.zeros(3)
    start = 0.0
    for seg in spec.segments:
        end = start + seg.duration
        if isinstance(seg, Move):
            target = np.asarray(seg.target, dtype=float)
            u = np.asarray(seg.rotvec, dtype=float)
            if t < end:
                s, ds, dds = quintic((t - start) / seg.duration)
                T = seg.duration
                # R(s) = R0 Exp(u s): body rate u ds, world rate R0 u ds
                return DesiredLoadSample(
                    p=p + (target - p) * s,
                    v=(target - p) * ds / T,
                    a=(target - p) * dds / T**2,
                    R=R @ expm_so3(u * s),
                    omega=R @ u * ds / T)
            p = target
            R = R @ expm_so3(u)
        elif t < end:
            break
        start = end
    return DesiredLoadSample(p=p, v=zero.copy(), a=zero.copy(), R=R, omega=zero.copy())


def default_spec():
    """Static 5 s, 1.5 m along x in 10 s, static 10 s."""
    return TrajectorySpec(segments=(Hold(5.0), Move((1.5, 0.0, 0.0), 10.0), Hold(10.0)))
