"""Fixed-step simulation of the closed loop: wrench controller, force
allocation, internal-force optimizer, carrier tracking and elastic cables.

Physics advances with split RK4 steps: cable forces are evaluated once per
physics step and held while the load and the carriers are integrated.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import trajectory as traj
from .config import ScenarioConfig
from .controller import ControllerGains, WrenchController
from .errors import DegenerateDirectionError, TransportError
from .feasibility import (desired_carrier_targets, external_internal_split,
                          predict_carrier_velocities)
from .grasp import AllocationFrame, allocate_forces
from .internal_forces import (ControlSnapshot, InternalForceParams, OptimizerWeights,
                              balanced_phase_basis, lambda_eval, optimize, step_schedule,
                              uniform_phases)
from .model import (DEGENERATE_DISTANCE, CarrierState, LoadState, SystemGeometry,
                    cable_direction)
from .so3 import E3, cross3, expm_so3, orthonormalize, skew

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CableParams:
    L0: float = 0.8
    K_c: float = 500.0
    B_c: float = 0.1
    unilateral: bool = True

    def __post_init__(self):
        if not (self.L0 > 0 and self.K_c > 0 and self.B_c >= 0):
            raise ValueError("cable parameters need L0 > 0, K_c > 0, B_c >= 0")


@dataclass(frozen=True)
class CarrierModel:
    mode: str = "point_mass_pd"
    m_c: float = 0.01
    K_p: float = 1000.0
    K_d: float = 1.5

    def __post_init__(self):
        if self.mode not in ("kinematic", "point_mass_pd"):
            raise ValueError(f"unknown carrier mode {self.mode!r}")
        if self.K_p < 0 or self.K_d < 0:
            raise ValueError("carrier gains must be nonnegative")

    @property
    def compliance(self):
        """Extra commanded length per newton lost to the PD steady-state offset."""
        return 1.0 / self.K_p if self.mode == "point_mass_pd" else 0.0


def cable_force_on_load(p_R, v_R, load, geom, params, i):
    """Spring-damper cable force on the load and its tension."""
    q, length = cable_direction(p_R, load, geom, i)
    stretch = length - params.L0
    rate = (np.asarray(v_R, dtype=float) - load.attachment_velocity(geom, i)) @ q
    T = params.K_c * stretch + params.B_c * rate
    if params.unilateral:
        T = max(0.0, T)
    return T * q, T


def cable_forces(carriers, load, geom, params):
    """All cable forces on the load, shape (n, 3), and tensions (n,)."""
    attach = load.p + geom.b @ load.R.T
    d = carriers.p - attach
    length = np.sqrt(np.einsum("ij,ij->i", d, d))
    if np.any(length <= DEGENERATE_DISTANCE):
        i = int(np.argmin(length))
        raise DegenerateDirectionError(f"carrier {i} coincides with its attachment point")
    q = d / length[:, None]
    v_att = load.v + geom.b @ (load.R @ skew(load.omega)).T
    rate = np.einsum("ij,ij->i", carriers.v - v_att, q)
    T = params.K_c * (length - params.L0) + params.B_c * rate
    if params.unilateral:
        T = np.maximum(T, 0.0)
    return T[:, None] * q, T


def _load_accel(v, R, w, F_world, S_b, geom, B_L, B_ang, J_inv):
    """Translational and angular acceleration for forces held in the world frame."""
    a = (F_world.sum(axis=0) - B_L * v) / geom.m_L - geom.g * E3
    # body torque: sum S(b_i) R^T f_i
    tau = np.einsum("nij,nj->i", S_b, F_world @ R)
    dw = J_inv @ (tau - cross3(w, geom.J_L @ w) - B_ang * w)
    return a, dw


def load_step(load, f, geom, B_L, dt, B_ang=None):
    """One RK4 step of the Newton-Euler load dynamics with cable forces ``f`` held.

    Attitude stages use the exponential map; the final update applies the
    RK4-weighted mean body rate.
    """
    if not 0 < dt <= 0.01:
        raise ValueError(f"dt must be in (0, 0.01], got {dt}")
    B_ang = B_L if B_ang is None else B_ang
    F = np.asarray(f, dtype=float).reshape(-1, 3)
    J_inv = np.linalg.inv(geom.J_L)
    b = np.array([skew(bi) for bi in geom.b])
    p0, v0, R0, w0 = load.p, load.v, load.R, load.omega

    a1, dw1 = _load_accel(v0, R0, w0, F, b, geom, B_L, B_ang, J_inv)
    v2, w2 = v0 + 0.5 * dt * a1, w0 + 0.5 * dt * dw1
    R2 = R0 @ expm_so3(0.5 * dt * w0)
    a2, dw2 = _load_accel(v2, R2, w2, F, b, geom, B_L, B_ang, J_inv)
    v3, w3 = v0 + 0.5 * dt * a2, w0 + 0.5 * dt * dw2
    R3 = R0 @ expm_so3(0.5 * dt * w2)
    a3, dw3 = _load_accel(v3, R3, w3, F, b, geom, B_L, B_ang, J_inv)
    v4, w4 = v0 + dt * a3, w0 + dt * dw3
    R4 = R0 @ expm_so3(dt * w3)
    a4, dw4 = _load_accel(v4, R4, w4, F, b, geom, B_L, B_ang, J_inv)

    p = p0 + dt / 6.0 * (v0 + 2 * v2 + 2 * v3 + v4)
    v = v0 + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
    w = w0 + dt / 6.0 * (dw1 + 2 * dw2 + 2 * dw3 + dw4)
    w_mean = (w0 + 2 * w2 + 2 * w3 + w4) / 6.0
    R = orthonormalize(R0 @ expm_so3(dt * w_mean))
    return LoadState(p=p, R=R, v=v, omega=w)


def carrier_step(carrier, target_p, target_v, reaction, model, dt):
    """Advance all carriers one step toward their targets.

    ``reaction`` (n, 3) is the cable pull ``T_i q_i``; the cable drags the
    carrier toward the load, hence the minus sign. Gravity on the carrier is
    assumed compensated.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    target_p = np.asarray(target_p, dtype=float)
    target_v = np.asarray(target_v, dtype=float)
    if model.mode == "kinematic":
        return CarrierState(target_p.copy(), target_v.copy())
    reaction = np.asarray(reaction, dtype=float)

    def acc(p, v):
        return (model.K_p * (target_p - p) + model.K_d * (target_v - v) - reaction) / model.m_c

    p0, v0 = carrier.p, carrier.v
    k1p, k1v = v0, acc(p0, v0)
    k2p, k2v = v0 + 0.5 * dt * k1v, acc(p0 + 0.5 * dt * k1p, v0 + 0.5 * dt * k1v)
    k3p, k3v = v0 + 0.5 * dt * k2v, acc(p0 + 0.5 * dt * k2p, v0 + 0.5 * dt * k2v)
    k4p, k4v = v0 + dt * k3v, acc(p0 + dt * k3p, v0 + dt * k3v)
    return CarrierState(p0 + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p),
                        v0 + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v))


# --- scenario assembly -------------------------------------------------------

def _gain_matrix(v):
    a = np.asarray(v, dtype=float)
    return a * np.eye(3) if a.ndim == 0 else (np.diag(a) if a.ndim == 1 else a)


def build_geometry(cfg):
    g = cfg.geometry
    if g.attachments is not None:
        b = np.asarray(g.attachments, dtype=float)
    else:
        ang = np.pi / g.n + 2.0 * np.pi * np.arange(g.n) / g.n
        b = g.attachment_radius * np.column_stack([np.cos(ang), np.sin(ang), np.zeros(g.n)])
    J = g.load_inertia
    J = _gain_matrix(J) if not np.isscalar(J) else J * np.eye(3)
    return SystemGeometry(b=b, L=g.cable_length, m_L=g.load_mass, J_L=J,
                          m_c=g.carrier_mass, g=g.gravity)


def build_gains(cfg):
    c = cfg.controller
    return ControllerGains(*(_gain_matrix(getattr(c, k)) for k in ("kp", "kv", "ki", "kR", "kw", "kiR")))


def build_params(cfg, k):
    o = cfg.optimizer
    m = k if o.columns is None else len(o.columns)
    phases = uniform_phases(m) if o.phases is None else np.asarray(o.phases, dtype=float)
    return InternalForceParams(
        xi=o.initial_xi, A=o.initial_A, phases=phases,
        xi_bounds=tuple(o.xi_bounds), A_bounds=tuple(o.A_bounds),
        columns=None if o.columns is None else tuple(o.columns),
        dim=None if o.columns is None else k)


def build_trajectory(cfg):
    t = cfg.trajectory
    segs = []
    for s in t.segments:
        if s.kind == "hold":
            segs.append(traj.Hold(s.duration))
        else:
            segs.append(traj.Move(tuple(s.target), s.duration,
                                  tuple(s.rotvec) if s.rotvec is not None else (0.0, 0.0, 0.0)))
    return traj.TrajectorySpec(tuple(segs), tuple(t.initial_position),
                               expm_so3(np.asarray(t.initial_rotvec, dtype=float)))


# --- trace --------------------------------------------------------------------

def trace_columns(n):
    cols = ["t"]
    cols += [f"load_{a}" for a in "xyz"] + [f"load_v{a}" for a in "xyz"]
    cols += [f"load_w{a}" for a in "xyz"] + [f"load_r{i}{j}" for i in "123" for j in "123"]
    cols += [f"ref_{a}" for a in "xyz"] + [f"ref_v{a}" for a in "xyz"]
    cols += [f"e_p{a}" for a in "xyz"] + ["e_p_norm"]
    cols += [f"e_R{a}" for a in "xyz"] + ["e_R_norm"]
    cols += [f"wd_f{a}" for a in "xyz"] + [f"wd_t{a}" for a in "xyz"]
    cols += ["xi", "A", "opt_ran", "opt_feasible", "opt_fallback"]
    for i in range(1, n + 1):
        c = f"c{i}_"
        cols += [c + a for a in "xyz"] + [c + f"v{a}" for a in "xyz"] + [c + "speed"]
        cols += [c + f"d{a}" for a in "xyz"] + [c + f"dv{a}" for a in "xyz"]
        cols += [c + "dspeed", c + "pspeed", c + "T", c + "Td", c + "margin"]
    return cols


@dataclass
class SimTrace:
    n: int
    columns: list
    rows: list = field(default_factory=list)
    aborted: bool = False
    error: str | None = None
    fallback_count: int = 0
    optimizer_calls: int = 0

    def append(self, row):
        self.rows.append(np.asarray(row, dtype=float))

    def array(self):
        if not self.rows:
            return np.zeros((0, len(self.columns)))
        return np.vstack(self.rows)

    def col(self, name):
        return self.array()[:, self.columns.index(name)]

    def carrier_cols(self, suffix):
        """(ticks, n) array of a per-carrier column such as ``'dspeed'``."""
        A = self.array()
        idx = [self.columns.index(f"c{i}_{suffix}") for i in range(1, self.n + 1)]
        return A[:, idx]


class SimulationAborted(TransportError):
    def __init__(self, trace, cause):
        self.trace = trace
        self.cause = cause
        super().__init__(f"simulation aborted at t={trace.rows[-1][0] if trace.rows else 0.0:.3f}: {cause}")


def initial_carriers(targets, model):
    if model.mode == "kinematic":
        return CarrierState(targets.p.copy(), targets.v.copy())
    # PD steady state: K_p (p_d - p) balances the cable pull T q
    return CarrierState(targets.p - (targets.T / model.K_p)[:, None] * targets.q, targets.v.copy())


def initial_basis(frame, w_d, params):
    """Balanced nullspace basis for the hover cable directions at the first tick."""
    f = (frame.G_pinv @ w_d).reshape(-1, 3)
    q = f / np.linalg.norm(f, axis=1)[:, None]
    S = params.selection()
    N_drv = balanced_phase_basis(frame.N @ S, q, params.phases)
    if params.columns is None:
        return N_drv
    # rotate only within the driven columns' span; keep the others orthogonal to it
    N = frame.N.copy()
    N[:, list(params.columns)] = N_drv
    return N


def run_closed_loop(scenario: ScenarioConfig, raise_on_abort=False):
    """Simulate the scenario; returns the control-rate trace.

    If a module error stops the run, the trace up to the failure is returned
    with ``aborted`` set (or raised inside :class:`SimulationAborted`).
    """
    cfg = scenario
    geom = build_geometry(cfg)
    cable = CableParams(L0=float(np.mean(geom.L)), K_c=cfg.cable.stiffness,
                        B_c=cfg.cable.damping, unilateral=cfg.cable.unilateral)
    model = CarrierModel(cfg.carrier.mode, float(np.mean(geom.m_c)), cfg.carrier.kp, cfg.carrier.kd)
    compliance = 1.0 / cable.K_c + model.compliance
    gains = build_gains(cfg)
    spec = build_trajectory(cfg)
    weights = OptimizerWeights(cfg.optimizer.w_pos, cfg.optimizer.w_vel)
    k = 3 * geom.n - 6
    params = build_params(cfg, k)
    ctrl = WrenchController(gains, geom, cfg.controller.int_clamp_p, cfg.controller.int_clamp_R)

    dt = cfg.timing.dt
    dt_c = cfg.timing.control_period
    substeps = int(round(dt_c / dt))
    every = step_schedule(cfg.optimizer.period, dt_c)
    n_ticks = int(np.floor(cfg.duration / dt_c + 1e-9)) + 1
    B_L = cfg.geometry.load_damping
    B_ang = cfg.geometry.load_angular_damping
    eps, T_min = cfg.epsilon, cfg.tension_floor
    opt_on = cfg.optimizer.enabled
    lookahead = dict(lookahead=cfg.optimizer.lookahead, hold=every * dt_c,
                     samples=cfg.optimizer.lookahead_samples
                     or {"none": 0, "hold": every - 1, "period": 16}[cfg.optimizer.lookahead])

    trace = SimTrace(geom.n, trace_columns(geom.n))
    ref0 = traj.sample(spec, 0.0)
    load = LoadState(p=ref0.p, R=ref0.R, v=np.zeros(3), omega=np.zeros(3))
    carriers = None
    frame = None
    w_prev = None
    x = params.x

    for tick in range(n_ticks):
        t = tick * dt_c
        try:
            ref = traj.sample(spec, t)
            err, wrench = ctrl.update(t, load, ref)
            w_d = wrench.as_vector()
            first = frame is None
            frame = AllocationFrame.build(load.R, load.omega, geom, t, frame)
            if first and cfg.optimizer.basis == "balanced":
                frame = replace(frame, N=initial_basis(frame, w_d, params))
            w_dot = np.zeros(6) if w_prev is None else (w_d - w_prev) / dt_c
            w_prev = w_d

            ran = feas = fb = 0.0
            if opt_on and tick % every == 0:
                snap = ControlSnapshot.from_state(t, load, geom, frame, w_d, w_dot,
                                                  compliance=compliance, eps=eps, T_min=T_min,
                                                  **lookahead)
                out = optimize(x, snap, weights, params.with_x(x), cfg.optimizer.grid,
                               cfg.optimizer.polish)
                trace.optimizer_calls += 1
                x = out.x_star
                ran, feas, fb = 1.0, float(out.feasible), float(out.fallback_used)
                if out.fallback_used:
                    trace.fallback_count += 1
                    mf = cfg.optimizer.max_fallbacks
                    if mf is not None and trace.fallback_count > mf:
                        raise OptimizerBudgetExceeded(
                            f"{trace.fallback_count} infeasible optimizer calls exceed budget {mf}")
            p_now = params.with_x(x)
            lam, lam_dot = lambda_eval(p_now, t)
            f_d = allocate_forces(w_d, frame, lam)
            e, g = external_internal_split(frame, w_d, w_dot, lam, lam_dot)
            targets = desired_carrier_targets(f_d, e + g, load, geom, compliance, T_min)
            dec = predict_carrier_velocities(load, geom, frame, w_d, w_dot, lam, lam_dot,
                                             compliance, T_min)
            if carriers is None:
                carriers = initial_carriers(targets, model)

            _, T_real = cable_forces(carriers, load, geom, cable)
            row = [t, *load.p, *load.v, *load.omega, *load.R.ravel(), *ref.p, *ref.v,
                   *err.e_p, np.linalg.norm(err.e_p), *err.e_R, np.linalg.norm(err.e_R),
                   *w_d, x[0], x[1], ran, feas, fb]
            pspeed = dec.speeds
            for i in range(geom.n):
                row += [*carriers.p[i], *carriers.v[i], np.linalg.norm(carriers.v[i]),
                        *targets.p[i], *targets.v[i], np.linalg.norm(targets.v[i]),
                        pspeed[i], T_real[i], targets.T[i], pspeed[i] - eps]
            trace.append(row)

            if tick == n_ticks - 1:
                break
            for s in range(substeps):
                tau = (s + 1) * dt
                F, _ = cable_forces(carriers, load, geom, cable)
                new_load = load_step(load, F, geom, B_L, dt, B_ang)
                carriers = carrier_step(carriers, targets.p + tau * targets.v, targets.v, F,
                                        model, dt)
                load = new_load
        except OptimizerBudgetExceeded as exc:
            trace.aborted, trace.error = True, str(exc)
            exc.trace = trace
            raise
        except (TransportError, np.linalg.LinAlgError, FloatingPointError) as exc:
            trace.aborted, trace.error = True, str(exc)
            log.error("simulation aborted at t=%.3f: %s", t, exc)
            if raise_on_abort:
                raise SimulationAborted(trace, exc) from exc
            break
    return trace


class OptimizerBudgetExceeded(TransportError):
    trace = None
