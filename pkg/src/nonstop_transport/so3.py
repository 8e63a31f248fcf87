"""Small SO(3) helpers: hat/vee maps and exponential-map attitude updates."""
from __future__ import annotations

import numpy as np

E3 = np.array([0.0, 0.0, 1.0])


def skew(v):
    """Return the 3x3 matrix S(v) such that S(v) @ w == cross(v, w)."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def cross3(a, b):
    """Cross product of two 3-vectors (faster than np.cross for single vectors)."""
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


def vee(M):
    """Inverse of :func:`skew`. The symmetric part of ``M`` is averaged out."""
    M = np.asarray(M, dtype=float)
    return 0.5 * np.array([M[2, 1] - M[1, 2], M[0, 2] - M[2, 0], M[1, 0] - M[0, 1]])


def expm_so3(phi):
    """Rodrigues formula for Exp(S(phi))."""
    phi = np.asarray(phi, dtype=float)
    theta = float(np.linalg.norm(phi))
    K = skew(phi)
    if theta < 1e-8:
        # second-order Taylor, exact to rounding at this size
        return np.eye(3) + K + 0.5 * K @ K
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / theta**2
    return np.eye(3) + a * K + b * K @ K


def orthonormalize(R):
    """Project a near-rotation onto SO(3) via SVD (polar factor)."""
    U, _, Vt = np.linalg.svd(R)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


def integrate_rotation(R, omega_body, dt):
    """Advance ``R`` by a body-frame rate held constant for ``dt`` seconds."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return orthonormalize(R @ expm_so3(np.asarray(omega_body, dtype=float) * dt))


def rot_z(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def is_rotation(R, tol=1e-9):
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    return (np.linalg.norm(R.T @ R - np.eye(3)) <= tol
            and abs(np.linalg.det(R) - 1.0) <= tol)
