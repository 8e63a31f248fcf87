"""Grasp matrix, right pseudoinverse, continuous nullspace tracking and derivatives.

Cable forces ``f`` (stacked, world frame) map to the load wrench
``w = (force_world, torque_body)`` through ``w = G(R) f``. The nullspace of
``G`` holds the internal forces; its basis is kept continuous in time with an
orthogonal Procrustes alignment so that it can be finite-differenced.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllocationSingularityError, BasisDimensionError
from .so3 import skew

SINGULAR_RATIO = 1e-8


def grasp_matrix(R, geom):
    n = geom.n
    G = np.zeros((6, 3 * n))
    RT = np.asarray(R).T
    for i in range(n):
        G[:3, 3 * i:3 * i + 3] = np.eye(3)
        G[3:, 3 * i:3 * i + 3] = skew(geom.b[i]) @ RT
    return G


def grasp_matrix_dot(R, omega, geom):
    """Analytic time derivative of :func:`grasp_matrix` for body rate ``omega``."""
    n = geom.n
    Gd = np.zeros((6, 3 * n))
    RdT = (np.asarray(R) @ skew(omega)).T
    for i in range(n):
        Gd[3:, 3 * i:3 * i + 3] = skew(geom.b[i]) @ RdT
    return Gd


def _check_rank(G):
    s = np.linalg.svd(G, compute_uv=False)
    if s[0] == 0.0 or s[5] < SINGULAR_RATIO * s[0]:
        raise AllocationSingularityError(
            f"grasp matrix is rank deficient (sigma_6/sigma_1 = {s[5] / max(s[0], 1e-300):.3g})")


def right_pseudoinverse(G):
    """Gᵀ(GGᵀ)⁻¹, the minimum-norm right inverse of a full-row-rank ``G``."""
    _check_rank(G)
    return G.T @ np.linalg.inv(G @ G.T)


def pseudoinverse_dot(G, G_dot):
    _check_rank(G)
    M = np.linalg.inv(G @ G.T)
    Md = G_dot @ G.T + G @ G_dot.T
    return G_dot.T @ M - G.T @ M @ Md @ M


def procrustes_align(N_raw, N_prev):
    """Rotate the columns of ``N_raw`` (within their span) to best match ``N_prev``."""
    U, _, Vt = np.linalg.svd(N_raw.T @ N_prev)
    return N_raw @ (U @ Vt)


def nullspace_basis(G, N_prev=None):
    """Orthonormal basis of ker(G); aligned to ``N_prev`` when given."""
    U, s, Vt = np.linalg.svd(G)
    if s[0] == 0.0 or s[-1] < SINGULAR_RATIO * s[0]:
        raise AllocationSingularityError(
            f"grasp matrix is rank deficient (sigma_min/sigma_1 = {s[-1] / max(s[0], 1e-300):.3g})")
    rank = int(np.sum(s > SINGULAR_RATIO * s[0]))
    N = Vt[rank:].T.copy()
    if N_prev is None:
        return N
    if N_prev.shape != N.shape:
        raise BasisDimensionError(
            f"nullspace dimension changed from {N_prev.shape[1]} to {N.shape[1]}")
    return procrustes_align(N, N_prev)


def nullspace_dot(N, N_prev, dt):
    """Backward difference of aligned bases; returns ``(N_dot, warmup)``."""
    if N_prev is None:
        return np.zeros_like(N), True
    if N_prev.shape != N.shape:
        raise BasisDimensionError(
            f"nullspace dimension changed from {N_prev.shape[1]} to {N.shape[1]}")
    return (N - N_prev) / dt, False


@dataclass(frozen=True)
class AllocationFrame:
    G: np.ndarray
    G_pinv: np.ndarray
    N: np.ndarray
    G_dot: np.ndarray
    Gpinv_dot: np.ndarray
    N_dot: np.ndarray
    t: float
    warmup: bool = False

    @property
    def k(self):
        return self.N.shape[1]

    @classmethod
    def build(cls, R, omega, geom, t, previous=None):
        """Assemble the frame at time ``t``.

        ``previous`` is the frame from the preceding control instant; it
        supplies the alignment target and the finite-difference base for Ṅ.
        """
        G = grasp_matrix(R, geom)
        G_pinv = right_pseudoinverse(G)
        N_prev = None if previous is None else previous.N
        N = nullspace_basis(G, N_prev)
        G_dot = grasp_matrix_dot(R, omega, geom)
        Gpinv_dot = pseudoinverse_dot(G, G_dot)
        if previous is None or t <= previous.t:
            N_dot, warm = np.zeros_like(N), True
        else:
            N_dot, warm = nullspace_dot(N, N_prev, t - previous.t)
        return cls(G, G_pinv, N, G_dot, Gpinv_dot, N_dot, float(t), warm)


def allocate_forces(w_d, frame, lam):
    """Cable forces f_d = G⁺ w_d + N λ (stacked, 3n)."""
    return frame.G_pinv @ np.asarray(w_d, dtype=float) + frame.N @ np.asarray(lam, dtype=float)
