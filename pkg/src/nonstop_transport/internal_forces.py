"""Sinusoidal internal forces and the online (frequency, amplitude) optimizer.

Nullspace coordinates follow ``λ_j(t) = A cos(ξ t + φ_j)``. At each
decision instant the pair ``x = (ξ, A)`` is re-selected as the point closest
(in the warm-start objective ``J``) to the previous one such that every
carrier's predicted speed stays above ``ε``.

The solver is a deterministic grid scan followed by a bounded Nelder-Mead
polish of the best feasible grid point.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .errors import LowTensionError, PreconditionError
from .feasibility import EPSILON_DEFAULT, T_MIN_DEFAULT, attachment_velocities

log = logging.getLogger(__name__)


def uniform_phases(k):
    return -np.pi + 2.0 * np.pi * np.arange(k) / k


def _complete(U):
    """Orthonormal square matrix whose leading columns are exactly ``U``."""
    m = U.shape[1]
    Q, _ = np.linalg.qr(np.column_stack([U, np.eye(U.shape[0])]))
    Q = Q[:, :U.shape[0]]
    Q[:, :m] *= np.sign(np.einsum("ij,ij->j", Q[:, :m], U))
    return Q


def balanced_phase_basis(N, q, phases, starts=8, seed=0):
    """Rotate the nullspace basis ``N`` within its span so that the sinusoidal
    pattern set by ``phases`` moves every carrier on a round ellipse.

    ``λ(t)`` always lies in the plane spanned by ``cos φ`` and ``sin φ``; the
    rotation picks which internal-force pattern that plane maps to. The
    smallest ellipse semi-axis over carriers (cable directions ``q``, shape
    (n, 3)) is maximized; its upper bound is ``σ_P / sqrt(n)``.
    """
    from scipy.optimize import minimize

    n, k = q.shape[0], N.shape[1]
    P = np.column_stack([np.cos(phases), np.sin(phases)])
    V, sig, _ = np.linalg.svd(P, full_matrices=False)
    if k < 2 or sig[-1] < 1e-9 * max(sig[0], 1e-300):
        log.warning("phase vectors span less than a plane; keeping the nullspace basis")
        return N
    Pi = np.eye(3)[None] - q[:, :, None] * q[:, None, :]

    def lam_min(z):
        U, _ = np.linalg.qr(z.reshape(k, 2))
        B = np.einsum("nij,njk->nik", Pi, (N @ U).reshape(n, 3, 2)) * sig[None, None, :]
        M = np.einsum("nji,njk->nik", B, B)
        tr = M[:, 0, 0] + M[:, 1, 1]
        det = M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] ** 2
        return 0.5 * (tr - np.sqrt(np.maximum(tr * tr - 4.0 * det, 0.0)))

    bound = sig.min() ** 2 / n
    rng = np.random.default_rng(seed)
    best_z, best = None, -np.inf
    for _ in range(starts):
        x0 = np.append(rng.standard_normal(2 * k), 0.0)
        res = minimize(lambda x: -x[-1], x0, method="SLSQP",
                       constraints=[dict(type="ineq", fun=lambda x: lam_min(x[:-1]) - x[-1])],
                       options=dict(maxiter=500, ftol=1e-12))
        val = lam_min(res.x[:-1]).min()
        if val > best:
            best_z, best = res.x[:-1], val
        if best >= 0.999 * bound:
            break
    U, _ = np.linalg.qr(best_z.reshape(k, 2))
    # Q maps the phase plane V onto U: N Q P = N U diag(sig) W^T
    Q = _complete(U) @ _complete(V).T
    return N @ Q


@dataclass(frozen=True)
class InternalForceParams:
    xi: float
    A: float
    phases: np.ndarray
    xi_bounds: tuple = (0.1, 8.0)
    A_bounds: tuple = (0.0, 3.0)
    columns: tuple | None = None  # nullspace columns driven; None = all
    dim: int | None = None  # nullspace dimension, required with ``columns``

    def __post_init__(self):
        phases = np.asarray(self.phases, dtype=float).reshape(-1)
        object.__setattr__(self, "phases", phases)
        lo, hi = self.xi_bounds
        if not (0 <= lo <= hi):
            raise PreconditionError(f"bad frequency bounds {self.xi_bounds}")
        lo, hi = self.A_bounds
        if not (0 <= lo <= hi):
            raise PreconditionError(f"bad amplitude bounds {self.A_bounds}")
        if self.columns is not None:
            cols = tuple(int(c) for c in self.columns)
            if len(cols) != phases.size:
                raise PreconditionError("need one phase per driven nullspace column")
            if self.dim is None or max(cols) >= self.dim or min(cols) < 0:
                raise PreconditionError("columns must index into a nullspace of size dim")
            object.__setattr__(self, "columns", cols)

    @property
    def x(self):
        return (self.xi, self.A)

    @property
    def k(self):
        return self.phases.size if self.columns is None else self.dim

    def with_x(self, x):
        xi, A = x
        return replace(self, xi=float(xi), A=float(A))

    def clip(self, x):
        xi, A = x
        return (float(np.clip(xi, *self.xi_bounds)), float(np.clip(A, *self.A_bounds)))

    def selection(self):
        """k x m matrix embedding the driven coordinates into the full nullspace."""
        if self.columns is None:
            return np.eye(self.k)
        S = np.zeros((self.dim, len(self.columns)))
        S[list(self.columns), range(len(self.columns))] = 1.0
        return S


@dataclass(frozen=True)
class OptimizerWeights:
    w_pos: float = 1.0
    w_vel: float = 0.1

    def __post_init__(self):
        if self.w_pos < 0 or self.w_vel < 0:
            raise PreconditionError("objective weights must be nonnegative")


@dataclass(frozen=True)
class OptimizationOutcome:
    x_star: tuple
    feasible: bool
    worst_margin: float
    iterations: int
    fallback_used: bool
    J: float = 0.0


def _lam(xi, A, phases, t):
    """Driven coordinates for arrays of (xi, A); returns (M, m) arrays.

    ``t`` is a scalar or one time per candidate.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))[:, None]
    A = np.atleast_1d(np.asarray(A, dtype=float))[:, None]
    t = np.asarray(t, dtype=float)
    if t.ndim:
        t = t[:, None]
    arg = xi * t + phases[None, :]
    return A * np.cos(arg), -A * xi * np.sin(arg)


def lambda_eval(params, t):
    """Full nullspace coordinates λ(t) and λ̇(t) (length k)."""
    lam, lam_dot = _lam(params.xi, params.A, params.phases, t)
    S = params.selection()
    return S @ lam[0], S @ lam_dot[0]


def objective(x, x_prev, t, params, weights):
    """Warm-start cost of moving from ``x_prev`` to ``x`` at time ``t``."""
    xi, A = np.asarray(x, dtype=float)
    return float(_objective_batch(np.array([xi]), np.array([A]), x_prev, t, params, weights)[0])


def _objective_batch(xi, A, x_prev, t, params, weights):
    lam, lam_dot = _lam(xi, A, params.phases, t)
    lam0, lam_dot0 = _lam(x_prev[0], x_prev[1], params.phases, t)
    return ((xi - x_prev[0]) ** 2 + (A - x_prev[1]) ** 2
            + weights.w_pos * np.sum((lam - lam0) ** 2, axis=1)
            + weights.w_vel * np.sum((lam_dot - lam_dot0) ** 2, axis=1))


@dataclass(frozen=True)
class ControlSnapshot:
    """Everything the speed constraint needs at one control instant."""

    t: float
    frame: object
    w_d: np.ndarray
    w_dot_d: np.ndarray
    v_L: np.ndarray  # (n, 3) attachment velocities
    L: np.ndarray  # (n,) rest cable lengths
    compliance: float = 0.0
    eps: float = EPSILON_DEFAULT
    T_min: float = T_MIN_DEFAULT
    # "none": current instant only; "hold": also every control tick until the
    # next decision; "period": also ``samples`` points over one period 2π/ξ.
    lookahead: str = "none"
    hold: float = 0.0
    samples: int = 0

    def __post_init__(self):
        if self.lookahead not in ("none", "hold", "period"):
            raise PreconditionError(f"unknown look-ahead mode {self.lookahead!r}")

    @classmethod
    def from_state(cls, t, load, geom, frame, w_d, w_dot_d, **kw):
        w = w_d.as_vector() if hasattr(w_d, "as_vector") else np.asarray(w_d, dtype=float)
        return cls(t=float(t), frame=frame, w_d=w, w_dot_d=np.asarray(w_dot_d, dtype=float),
                   v_L=attachment_velocities(load, geom), L=np.asarray(geom.L, dtype=float), **kw)

    @property
    def n(self):
        return self.L.size


def margins_batch(xi, A, snap, params, t=None):
    """Margins for arrays of candidates. Returns ``(margins (M, n), tension_ok (M,))``."""
    t = snap.t if t is None else t
    fr = snap.frame
    S = params.selection()
    N = fr.N @ S
    N_dot = fr.N_dot @ S
    n = snap.n
    lam, lam_dot = _lam(xi, A, params.phases, t)
    f = (fr.G_pinv @ snap.w_d)[None, :] + lam @ N.T
    e = fr.Gpinv_dot @ snap.w_d + fr.G_pinv @ snap.w_dot_d
    u = e[None, :] + lam @ N_dot.T + lam_dot @ N.T
    f = f.reshape(-1, n, 3)
    u = u.reshape(-1, n, 3)
    T = np.linalg.norm(f, axis=2)
    ok = np.all(T > snap.T_min, axis=1)
    Ts = np.where(T > 0, T, 1.0)
    q = f / Ts[:, :, None]
    u_perp = u - q * np.einsum("mij,mij->mi", q, u)[:, :, None]
    length = snap.L[None, :] + snap.compliance * T
    v = snap.v_L[None] + (length / Ts)[:, :, None] * u_perp
    m = np.linalg.norm(v, axis=2) - snap.eps
    return np.where(T > snap.T_min, m, -np.inf), ok


def _worst(xi, A, snap, params):
    """Smallest margin over carriers (and look-ahead samples) per candidate."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    A = np.atleast_1d(np.asarray(A, dtype=float))
    m, _ = margins_batch(xi, A, snap, params)
    worst = m.min(axis=1)
    if snap.lookahead == "none" or snap.samples <= 0:
        return worst
    # the snapshot is frozen; only the sinusoids advance
    for s in range(1, snap.samples + 1):
        if snap.lookahead == "hold":
            t = np.full(xi.shape, snap.t + snap.hold * s / snap.samples)
        else:
            t = snap.t + 2.0 * np.pi / np.maximum(xi, 1e-9) * s / (snap.samples + 1)
        m, _ = margins_batch(xi, A, snap, params, t=t)
        worst = np.minimum(worst, m.min(axis=1))
    return worst


def constraint_margins(x, snap, params):
    """Per-carrier speed margin ``‖v_i‖ - ε`` at the snapshot time."""
    xi, A = x
    lam, _ = lambda_eval(params.with_x(x), snap.t)
    f = (snap.frame.G_pinv @ snap.w_d + snap.frame.N @ lam).reshape(-1, 3)
    T = np.linalg.norm(f, axis=1)
    for i, Ti in enumerate(T):
        if not Ti > snap.T_min:
            raise LowTensionError(i, float(Ti), snap.T_min)
    m, _ = margins_batch(np.array([xi]), np.array([A]), snap, params)
    return m[0]


def grid_points(params, resolution=41):
    xi = np.linspace(*params.xi_bounds, resolution)
    A = np.linspace(*params.A_bounds, resolution)
    XI, AA = np.meshgrid(xi, A, indexing="ij")
    return XI.ravel(), AA.ravel()


def optimize(x_prev, snap, weights, params, resolution=41, polish=True):
    """Select ``(ξ, A)`` for the next hold interval.

    A feasible ``x_prev`` is returned unchanged. Otherwise the cheapest
    feasible grid point seeds a bounded Nelder-Mead polish of ``J``; if no
    grid point is feasible the least-infeasible grid point is returned with
    ``fallback_used`` set.
    """
    x_prev = (float(x_prev[0]), float(x_prev[1]))
    prev_worst = float(_worst(x_prev[0], x_prev[1], snap, params)[0])
    if prev_worst >= 0.0:
        return OptimizationOutcome(x_prev, True, prev_worst, 0, False, 0.0)

    XI, AA = grid_points(params, resolution)
    worst = _worst(XI, AA, snap, params)
    feasible = worst >= 0.0
    if not feasible.any():
        j = int(np.argmax(worst))
        x = (float(XI[j]), float(AA[j]))
        log.warning("t=%.3f: no feasible internal-force parameters; worst margin %.4g m/s",
                    snap.t, worst[j])
        J = float(_objective_batch(XI[j:j + 1], AA[j:j + 1], x_prev, snap.t, params, weights)[0])
        return OptimizationOutcome(x, False, float(worst[j]), XI.size, True, J)

    J = _objective_batch(XI, AA, x_prev, snap.t, params, weights)
    J = np.where(feasible, J, np.inf)
    j = int(np.argmin(J))
    best_x, best_J, best_w = (float(XI[j]), float(AA[j])), float(J[j]), float(worst[j])
    iters = XI.size
    if polish:
        bounds = [params.xi_bounds, params.A_bounds]

        def penalized(z):
            z = params.clip(z)
            w = float(_worst(z[0], z[1], snap, params)[0])
            Jz = float(_objective_batch(np.array([z[0]]), np.array([z[1]]), x_prev, snap.t,
                                        params, weights)[0])
            if not np.isfinite(w):
                return Jz + 1e6
            return Jz + (1e4 * -w if w < 0 else 0.0)

        scale = np.array([np.ptp(params.xi_bounds), np.ptp(params.A_bounds)]) / (resolution - 1)
        simplex = np.array([best_x, best_x + np.array([scale[0], 0.0]),
                            best_x + np.array([0.0, scale[1]])])
        simplex = np.array([params.clip(s) for s in simplex])
        if np.linalg.matrix_rank(simplex[1:] - simplex[0]) == 2:
            res = minimize(penalized, np.array(best_x), method="Nelder-Mead", bounds=bounds,
                           options=dict(initial_simplex=simplex, xatol=1e-6, fatol=1e-10,
                                        maxiter=200))
            iters += int(res.nit)
            z = params.clip(res.x)
            wz = float(_worst(z[0], z[1], snap, params)[0])
            Jz = float(_objective_batch(np.array([z[0]]), np.array([z[1]]), x_prev, snap.t,
                                        params, weights)[0])
            if wz >= 0.0 and Jz < best_J:
                best_x, best_J, best_w = z, Jz, wz
    return OptimizationOutcome(best_x, True, best_w, iters, False, best_J)


def step_schedule(opt_period, control_period):
    """Number of control ticks between optimizer invocations."""
    if control_period <= 0 or opt_period < control_period * (1 - 1e-12):
        raise PreconditionError("optimizer period must be at least the control period")
    return max(1, math.ceil(opt_period / control_period - 1e-9))
