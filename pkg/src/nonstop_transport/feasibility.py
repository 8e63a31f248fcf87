"""Carrier targets from allocated cable forces and the non-stopping velocity check.

A carrier moves at ``v_Li + (L_i / T_i) Π_i ḟ_i`` where ``v_Li`` is the
velocity of its attachment point and ``Π_i`` removes the cable-axis part of
the force derivative. ``ḟ`` splits into an external part (wrench and grasp
matrix motion) and an internal part (nullspace coordinates).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LowTensionError, PreconditionError
from .so3 import skew

T_MIN_DEFAULT = 0.05
EPSILON_DEFAULT = 0.2


def projector(q):
    q = np.asarray(q, dtype=float)
    if abs(np.linalg.norm(q) - 1.0) > 1e-9:
        raise PreconditionError(f"projector needs a unit vector, |q|={np.linalg.norm(q)}")
    return np.eye(3) - np.outer(q, q)


def _tensions(f, T_min):
    f = np.asarray(f, dtype=float).reshape(-1, 3)
    T = np.linalg.norm(f, axis=1)
    for i, Ti in enumerate(T):
        if not Ti > T_min:
            raise LowTensionError(i, float(Ti), T_min)
    return f, T


def attachment_velocities(load, geom):
    """v_Li = ṗ_L + Ṙ_L b_i for every carrier, shape (n, 3)."""
    Rd = load.R @ skew(load.omega)
    return load.v + geom.b @ Rd.T


@dataclass(frozen=True)
class DesiredCarrierSample:
    p: np.ndarray  # (n, 3)
    v: np.ndarray
    q: np.ndarray
    q_dot: np.ndarray
    f: np.ndarray
    T: np.ndarray
    length: np.ndarray  # commanded attachment-carrier distance


def desired_carrier_targets(f_d, f_dot_d, load, geom, compliance=0.0, T_min=T_MIN_DEFAULT):
    """Carrier endpoint positions/velocities realizing the cable forces ``f_d``.

    The commanded cable length is ``L_i + compliance * T_i``; with
    ``compliance = 0`` this is the inextensible-cable map. The measured load
    state is used, so the targets ride along with the load.
    """
    f, T = _tensions(f_d, T_min)
    fd = np.asarray(f_dot_d, dtype=float).reshape(-1, 3)
    q = f / T[:, None]
    radial = np.einsum("ij,ij->i", q, fd)  # Ṫ_i
    q_dot = (fd - radial[:, None] * q) / T[:, None]
    length = geom.L + compliance * T
    length_dot = compliance * radial
    attach = load.p + geom.b @ load.R.T
    p = attach + length[:, None] * q
    v = attachment_velocities(load, geom) + length[:, None] * q_dot + length_dot[:, None] * q
    return DesiredCarrierSample(p, v, q, q_dot, f, T, length)


def external_internal_split(frame, w_d, w_dot_d, lam, lam_dot):
    """Return ``(e, g)`` with e = d(G⁺)/dt w + G⁺ ẇ and g = Ṅλ + Nλ̇."""
    w_d = w_d.as_vector() if hasattr(w_d, "as_vector") else np.asarray(w_d, dtype=float)
    e = frame.Gpinv_dot @ w_d + frame.G_pinv @ np.asarray(w_dot_d, dtype=float)
    g = frame.N_dot @ np.asarray(lam, dtype=float) + frame.N @ np.asarray(lam_dot, dtype=float)
    return e, g


@dataclass(frozen=True)
class VelocityDecomposition:
    v_L: np.ndarray  # (n, 3) attachment velocities
    Pi: np.ndarray  # (n, 3, 3)
    E: np.ndarray  # (n, 3) projected external part
    G: np.ndarray  # (n, 3) projected internal part
    T: np.ndarray  # (n,)
    length: np.ndarray  # (n,)
    v_pred: np.ndarray  # (n, 3)

    @property
    def speeds(self):
        return np.linalg.norm(self.v_pred, axis=1)


def predict_carrier_velocities(load, geom, frame, w_d, w_dot_d, lam, lam_dot,
                               compliance=0.0, T_min=T_MIN_DEFAULT):
    w_vec = w_d.as_vector() if hasattr(w_d, "as_vector") else np.asarray(w_d, dtype=float)
    f = frame.G_pinv @ w_vec + frame.N @ np.asarray(lam, dtype=float)
    f, T = _tensions(f, T_min)
    q = f / T[:, None]
    e, g = external_internal_split(frame, w_vec, w_dot_d, lam, lam_dot)
    e, g = e.reshape(-1, 3), g.reshape(-1, 3)
    Pi = np.eye(3)[None] - q[:, :, None] * q[:, None, :]
    E = np.einsum("nij,nj->ni", Pi, e)
    Gi = np.einsum("nij,nj->ni", Pi, g)
    length = geom.L + compliance * T
    v_L = attachment_velocities(load, geom)
    v_pred = v_L + (length / T)[:, None] * (E + Gi)
    return VelocityDecomposition(v_L, Pi, E, Gi, T, length, v_pred)


def nonstop_margin(v_pred, eps=EPSILON_DEFAULT):
    """‖v‖ - ε; nonnegative iff the minimum-speed constraint holds."""
    if not eps > 0:
        raise PreconditionError("epsilon must be positive")
    return np.linalg.norm(np.asarray(v_pred, dtype=float), axis=-1) - eps
