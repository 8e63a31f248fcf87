"""Load/carrier/cable data types and the carrier-load kinematic map."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDirectionError, PreconditionError
from .so3 import is_rotation, skew

DEGENERATE_DISTANCE = 1e-9


def _vec3(v):
    a = np.asarray(v, dtype=float).reshape(3)
    if not np.all(np.isfinite(a)):
        raise PreconditionError(f"non-finite vector {a}")
    return a


@dataclass(frozen=True)
class SystemGeometry:
    """Attachment points (load frame), cable lengths and inertial parameters."""

    b: np.ndarray  # (n, 3)
    L: np.ndarray  # (n,)
    m_L: float = 1.0
    J_L: np.ndarray = field(default_factory=lambda: 0.01 * np.eye(3))
    m_c: np.ndarray | None = None
    g: float = 9.81

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.b, dtype=float))
        n = b.shape[0]
        if b.shape != (n, 3):
            raise PreconditionError(f"attachment points must be (n, 3), got {b.shape}")
        if n < 3:
            raise PreconditionError(f"need at least 3 carriers, got n={n}")
        L = np.broadcast_to(np.asarray(self.L, dtype=float), (n,)).copy()
        if np.any(L <= 0):
            raise PreconditionError("cable lengths must be positive")
        if self.m_L <= 0:
            raise PreconditionError("load mass must be positive")
        J = np.asarray(self.J_L, dtype=float)
        if J.shape != (3, 3) or not np.allclose(J, J.T, atol=1e-12):
            raise PreconditionError("load inertia must be a symmetric 3x3 matrix")
        if np.linalg.eigvalsh(J).min() <= 0:
            raise PreconditionError("load inertia must be positive definite")
        m_c = 0.01 if self.m_c is None else self.m_c
        m_c = np.broadcast_to(np.asarray(m_c, dtype=float), (n,)).copy()
        if np.any(m_c <= 0):
            raise PreconditionError("carrier masses must be positive")
        # rank(G) = 6 needs non-collinear attachments
        d = b - b[0]
        if np.linalg.matrix_rank(d, tol=1e-9 * max(1.0, np.abs(b).max())) < 2:
            raise PreconditionError("attachment points are collinear; grasp matrix would be singular")
        for arr in (b, L, J, m_c):
            arr.setflags(write=False)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "J_L", J)
        object.__setattr__(self, "m_c", m_c)

    @property
    def n(self):
        return self.b.shape[0]

    def check_index(self, i):
        if not 0 <= i < self.n:
            raise IndexError(f"carrier index {i} out of range for n={self.n}")


@dataclass(frozen=True)
class LoadState:
    p: np.ndarray
    R: np.ndarray
    v: np.ndarray
    omega: np.ndarray  # body frame

    def __post_init__(self):
        for name in ("p", "v", "omega"):
            object.__setattr__(self, name, _vec3(getattr(self, name)))
        R = np.asarray(self.R, dtype=float)
        if not is_rotation(R, tol=1e-6):
            raise PreconditionError("R is not a rotation matrix")
        object.__setattr__(self, "R", R)

    @classmethod
    def at_rest(cls, p=(0.0, 0.0, 0.0), R=None):
        return cls(p=p, R=np.eye(3) if R is None else R, v=np.zeros(3), omega=np.zeros(3))

    def attachment(self, geom, i):
        """World position of attachment point ``i``."""
        return self.p + self.R @ geom.b[i]

    def attachment_velocity(self, geom, i):
        return self.v + self.R @ skew(self.omega) @ geom.b[i]


@dataclass
class CarrierState:
    p: np.ndarray  # (n, 3)
    v: np.ndarray  # (n, 3)

    def copy(self):
        return CarrierState(self.p.copy(), self.v.copy())


@dataclass(frozen=True)
class CableState:
    q: np.ndarray  # (n, 3) unit directions load -> carrier
    T: np.ndarray  # (n,)

    @property
    def f(self):
        return self.T[:, None] * self.q


def carrier_position_from_load(load, q_i, geom, i, length=None):
    """Carrier position implied by the load pose and cable direction ``q_i``.

    ``length`` overrides ``geom.L[i]`` (used when the commanded cable length
    includes elastic stretch).
    """
    geom.check_index(i)
    q_i = _vec3(q_i)
    if abs(np.linalg.norm(q_i) - 1.0) > 1e-9:
        raise PreconditionError(f"cable direction must be a unit vector, |q|={np.linalg.norm(q_i)}")
    L = geom.L[i] if length is None else length
    return load.p + load.R @ geom.b[i] + L * q_i


def carrier_velocity_from_load(load, q_i, qdot_i, geom, i, length=None):
    geom.check_index(i)
    q_i, qdot_i = _vec3(q_i), _vec3(qdot_i)
    if abs(q_i @ qdot_i) > 1e-8 * max(1.0, np.linalg.norm(qdot_i)):
        raise PreconditionError(f"qdot must be orthogonal to q (q.qdot={q_i @ qdot_i:.3g})")
    L = geom.L[i] if length is None else length
    return load.v + load.R @ skew(load.omega) @ geom.b[i] + L * qdot_i


def cable_direction(p_R, load, geom, i):
    """Unit direction attachment -> carrier and the current attachment-carrier distance."""
    geom.check_index(i)
    d = _vec3(p_R) - load.attachment(geom, i)
    dist = float(np.linalg.norm(d))
    if dist <= DEGENERATE_DISTANCE:
        raise DegenerateDirectionError(f"carrier {i} coincides with its attachment point")
    return d / dist, dist
