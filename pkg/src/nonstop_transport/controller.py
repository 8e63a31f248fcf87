"""Load pose/twist errors and the PID wrench law."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .so3 import E3, cross3, vee


def _diag(g):
    g = np.asarray(g, dtype=float)
    if g.ndim == 0:
        return g * np.eye(3)
    if g.shape == (3,):
        return np.diag(g)
    return g


@dataclass(frozen=True)
class ControllerGains:
    K_p: np.ndarray = field(default_factory=lambda: 5.0 * np.eye(3))
    K_v: np.ndarray = field(default_factory=lambda: 2.0 * np.eye(3))
    K_i: np.ndarray = field(default_factory=lambda: 0.9 * np.eye(3))
    K_R: np.ndarray = field(default_factory=lambda: 0.5 * np.eye(3))
    K_w: np.ndarray = field(default_factory=lambda: 0.06 * np.eye(3))
    K_iR: np.ndarray = field(default_factory=lambda: 0.1 * np.eye(3))

    def __post_init__(self):
        for name in ("K_p", "K_v", "K_i", "K_R", "K_w", "K_iR"):
            K = _diag(getattr(self, name))
            if K.shape != (3, 3) or np.any(np.diag(K) < 0):
                raise ValueError(f"gain {name} must be a 3x3 matrix with nonnegative diagonal")
            object.__setattr__(self, name, K)


@dataclass(frozen=True)
class TrackingError:
    e_p: np.ndarray
    e_v: np.ndarray
    e_R: np.ndarray
    e_w: np.ndarray
    int_e_p: np.ndarray
    int_e_R: np.ndarray

    @classmethod
    def zero(cls):
        z = np.zeros(3)
        return cls(z, z, z, z, z, z)


@dataclass(frozen=True)
class Wrench:
    f: np.ndarray
    tau: np.ndarray

    def as_vector(self):
        return np.concatenate([self.f, self.tau])


def attitude_error(R, R_d):
    return 0.5 * vee(R_d.T @ R - R.T @ R_d)


def compute_errors(state, ref, previous=None, dt=0.0, int_clamp_p=2.0, int_clamp_R=1.0):
    """Tracking errors of ``state`` against the reference sample ``ref``.

    The angular-rate error is ``omega - omega_d`` with the world-frame
    reference rate rotated into the load body frame, so that ``-K_w e_w``
    damps it. Integrals are advanced with the trapezoidal rule from
    ``previous`` over ``dt`` and clamped per axis.
    """
    e_p = state.p - ref.p
    e_v = state.v - ref.v
    e_R = attitude_error(state.R, ref.R)
    e_w = state.omega - state.R.T @ ref.omega
    if previous is None or dt <= 0.0:
        int_p = np.zeros(3) if previous is None else previous.int_e_p
        int_R = np.zeros(3) if previous is None else previous.int_e_R
    else:
        int_p = previous.int_e_p + 0.5 * dt * (previous.e_p + e_p)
        int_R = previous.int_e_R + 0.5 * dt * (previous.e_R + e_R)
    int_p = np.clip(int_p, -int_clamp_p, int_clamp_p)
    int_R = np.clip(int_R, -int_clamp_R, int_clamp_R)
    return TrackingError(e_p, e_v, e_R, e_w, int_p, int_R)


def wrench_pid(err, state, gains, geom):
    f = -gains.K_p @ err.e_p - gains.K_v @ err.e_v - gains.K_i @ err.int_e_p + geom.m_L * geom.g * E3
    w = state.omega
    tau = (-gains.K_R @ err.e_R - gains.K_w @ err.e_w - gains.K_iR @ err.int_e_R
           + cross3(w, geom.J_L @ w))
    return Wrench(f, tau)


@dataclass
class WrenchController:
    """Stateful wrapper holding the integral states between control ticks."""

    gains: ControllerGains
    geom: object
    int_clamp_p: float = 2.0
    int_clamp_R: float = 1.0
    last: TrackingError | None = None
    last_t: float | None = None

    def update(self, t, state, ref):
        dt = 0.0 if self.last_t is None else t - self.last_t
        err = compute_errors(state, ref, self.last, dt, self.int_clamp_p, self.int_clamp_R)
        self.last, self.last_t = err, t
        return err, wrench_pid(err, state, self.gains, self.geom)

    def snapshot(self):
        return replace(self)
