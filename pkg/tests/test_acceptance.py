"""The ten acceptance criteria, each reported as one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py`` (about two minutes on one
core); the lines are repeated in the terminal summary.
"""
import json
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from nonstop_transport import cli
from nonstop_transport.feasibility import desired_carrier_targets, predict_carrier_velocities
from nonstop_transport.grasp import (AllocationFrame, grasp_matrix, grasp_matrix_dot,
                                     pseudoinverse_dot, right_pseudoinverse)
from nonstop_transport.internal_forces import (InternalForceParams, lambda_eval, objective,
                                               optimize, uniform_phases)
from nonstop_transport.model import LoadState, SystemGeometry
from nonstop_transport.simulator import load_step

from conftest import random_geometry, random_rotation
from oracles import WEIGHTS, cases, feasible_scalar, grid_oracle, make_snapshot

ROOT = Path(__file__).resolve().parents[1]
PAPER_CFG = ROOT / "configs" / "paper_reproduction.yaml"
REPORT = []


def record(n, title, ok, detail):
    line = f"criterion {n:2d} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    REPORT.append(line)
    print(line)
    assert ok, line


def _run(out, *extra):
    t0 = time.perf_counter()
    code = cli.main(["run", str(PAPER_CFG), "--out", str(out), "--jobs", "1", *extra])
    elapsed = time.perf_counter() - t0
    summary = json.loads((out / "summary.json").read_text())
    return code, summary, elapsed


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    on = _run(root / "on", "--seed-check")
    off = _run(root / "off", "--override", "optimizer.enabled=false")
    return {"on": on, "off": off, "root": root}


def test_c01_velocity_floor(runs):
    code, s, elapsed = runs["on"]
    m = s["metrics"]
    per_run = elapsed / 2  # the run was simulated twice for the seed check
    ok = code == 0 and m["min_speed_desired"] >= 0.18 and per_run < 60.0
    record(1, "velocity floor with optimizer", ok,
           f"min desired speed {m['min_speed_desired']:.4f} m/s (>= 0.18), realized "
           f"{m['min_speed_realized']:.4f} m/s (reported only), {per_run:.1f} s per run (< 60)")


def test_c02_stagnation_without_optimizer(runs):
    code, s, _ = runs["off"]
    m = s["metrics"]
    decel = m["phase_min_speed_desired"]["move1_decel"]
    ok = code == 0 and decel < 0.05
    record(2, "stagnation without optimizer", ok,
           f"min desired speed during deceleration {decel:.4f} m/s (< 0.05), "
           f"xi/A fixed at {s['config']['optimizer']['initial_xi']}/"
           f"{s['config']['optimizer']['initial_A']}")


def test_c03_load_tracking(runs):
    on, off = runs["on"][1]["metrics"], runs["off"][1]["metrics"]
    ratio = on["mean_e_p"] / off["mean_e_p"]
    # same order of magnitude as the reported 0.015 / 0.013 m
    magnitude = all(0.1 <= m / ref <= 10 for m, ref in ((on["mean_e_p"], 0.015),
                                                        (off["mean_e_p"], 0.013)))
    ok = (on["mean_e_p"] < 0.05 and off["mean_e_p"] < 0.05 and on["mean_e_R"] < 0.01
          and off["mean_e_R"] < 0.01 and magnitude and 0.5 <= ratio <= 2.0)
    record(3, "load tracking", ok,
           f"mean |e_p| on {on['mean_e_p']:.4f} / off {off['mean_e_p']:.4f} m (< 0.05, "
           f"ratio {ratio:.2f}), mean |e_R| on {on['mean_e_R']:.5f} / off {off['mean_e_R']:.5f} (< 0.01)")


def test_c04_static_convergence(runs):
    parts, ok = [], True
    for label in ("on", "off"):
        m = runs[label][1]["metrics"]
        start, end = m["final_hold_e_p_start"], m["final_hold_e_p_end"]
        ok &= end < 0.005 and end < start
        parts.append(f"{label}: {start:.4f} -> {end:.5f} m")
    record(4, "static convergence in final hold", ok, "; ".join(parts) + " (end < 0.005, decreasing)")


def test_c05_wrench_invariance(rng):
    worst_null = worst_id = worst_norm = 0.0
    for _ in range(1000):
        geom = random_geometry(rng)
        fr = AllocationFrame.build(random_rotation(rng), np.zeros(3), geom, 0.0)
        lam = rng.standard_normal(fr.k) * 10 ** rng.uniform(-3, 3)
        worst_null = max(worst_null, np.linalg.norm(fr.G @ fr.N @ lam) / np.linalg.norm(lam))
        worst_id = max(worst_id, np.abs(fr.G @ fr.G_pinv - np.eye(6)).max())
    for _ in range(100):
        geom = random_geometry(rng)
        G = grasp_matrix(random_rotation(rng), geom)
        w = rng.standard_normal(6)
        m = G.shape[1]
        K = np.block([[np.eye(m), G.T], [G, np.zeros((6, 6))]])
        f_ls = np.linalg.solve(K, np.concatenate([np.zeros(m), w]))[:m]
        worst_norm = max(worst_norm, np.linalg.norm(right_pseudoinverse(G) @ w - f_ls))
    ok = worst_null <= 1e-8 and worst_id <= 1e-9 and worst_norm <= 1e-9
    record(5, "wrench invariance", ok,
           f"max |G N lam|/|lam| {worst_null:.2e} (<= 1e-8), max |G G+ - I| {worst_id:.2e} "
           f"(<= 1e-9), min-norm vs KKT {worst_norm:.2e}")


def test_c06_derivative_oracles(rng):
    h = 1e-6
    err = dict(G=0.0, Gpinv=0.0, N=0.0, lam=0.0, v=0.0)
    for c in cases(rng, 100):
        t = c.t0
        R, w = c.R(t), c.omega(t)
        G, Gd = grasp_matrix(R, c.geom), grasp_matrix_dot(R, w, c.geom)
        fd = (grasp_matrix(c.R(t + h), c.geom) - grasp_matrix(c.R(t - h), c.geom)) / (2 * h)
        err["G"] = max(err["G"], np.abs(Gd - fd).max() / max(1.0, np.abs(fd).max()))
        fdP = (right_pseudoinverse(grasp_matrix(c.R(t + h), c.geom))
               - right_pseudoinverse(grasp_matrix(c.R(t - h), c.geom))) / (2 * h)
        Pd = pseudoinverse_dot(G, Gd)
        err["Gpinv"] = max(err["Gpinv"], np.abs(Pd - fdP).max() / max(1.0, np.abs(fdP).max()))
        fr = c.frame(t, delta=1e-6)
        err["N"] = max(err["N"], np.abs(fr.G_dot @ fr.N + fr.G @ fr.N_dot).max())
        lam, lam_dot = lambda_eval(c.params, t)
        fd_lam = (lambda_eval(c.params, t + 1e-7)[0] - lambda_eval(c.params, t - 1e-7)[0]) / 2e-7
        err["lam"] = max(err["lam"], np.abs(lam_dot - fd_lam).max())
        dec = predict_carrier_velocities(c.load(t), c.geom, fr, c.w(t), c.w_dot(t), lam, lam_dot)
        p = lambda s: desired_carrier_targets(c.f(s), np.zeros(3 * c.geom.n), c.load(s), c.geom).p
        err["v"] = max(err["v"], np.abs(dec.v_pred - (p(t + h) - p(t - h)) / (2 * h)).max())
    tol = dict(G=1e-4, Gpinv=1e-4, N=1e-4, lam=1e-6, v=1e-3)
    ok = all(err[k] <= tol[k] for k in tol)
    record(6, "derivative oracles", ok,
           ", ".join(f"{k} {err[k]:.1e} (<= {tol[k]:.0e})" for k in tol))


def test_c07_optimizer_vs_grid(geom4, rng):
    p = InternalForceParams(xi=1.0, A=0.1, phases=uniform_phases(6))
    agree, worst_gap, feasible = 0, -np.inf, 0
    for j in range(50):
        # every fifth snapshot asks for an unreachable speed floor
        snap = make_snapshot(rng, geom4, eps=5.0 if j % 5 == 4 else 0.2)
        x_prev = tuple(rng.uniform([0.1, 0.0], [8.0, 1.0]))
        ok_o, x_o, J_o = grid_oracle(x_prev, snap, p)
        out = optimize(x_prev, snap, WEIGHTS, p)
        same = out.feasible == ok_o
        if same and ok_o:
            feasible += 1
            cell = np.array([np.ptp(p.xi_bounds), np.ptp(p.A_bounds)]) / 40
            slack = max(abs(objective(np.add(x_o, d), x_prev, snap.t, p, WEIGHTS) - J_o)
                        for d in (cell * [1, 0], cell * [0, 1], -cell * [1, 0], -cell * [0, 1]))
            gap = objective(out.x_star, x_prev, snap.t, p, WEIGHTS) - J_o
            worst_gap = max(worst_gap, gap - slack)
            same = gap <= slack
        agree += same
    ok = agree == 50
    record(7, "optimizer vs 41x41 grid oracle", ok,
           f"{agree}/50 agree ({feasible} feasible), worst J excess over slack {worst_gap:.2e}")


def test_c08_warm_start_idempotence(geom4, rng):
    p = InternalForceParams(xi=1.0, A=0.1, phases=uniform_phases(6))
    kept = same = 0
    while kept < 1000:
        snap = make_snapshot(rng, geom4)
        x_prev = (float(rng.uniform(0.1, 8.0)), float(rng.uniform(0.0, 3.0)))
        if not feasible_scalar(x_prev, snap, p):
            continue
        kept += 1
        same += optimize(x_prev, snap, WEIGHTS, p).x_star == x_prev
    record(8, "warm-start idempotence", same == kept, f"{same}/{kept} feasible x_prev returned unchanged")


def test_c09_determinism(runs):
    code, s, _ = runs["on"]
    out = runs["root"] / "on"
    a = (out / "trace.csv").read_bytes()
    b = (out / "seed_check" / "trace.csv").read_bytes()
    record(9, "determinism (--seed-check)", code == 0 and a == b,
           f"exit {code}, traces {len(a)} and {len(b)} bytes, identical={a == b}")


def test_c10_physics_sanity():
    dt = 1e-3
    sq = 0.4 * np.array([[1, 1, 0], [-1, 1, 0], [-1, -1, 0], [1, -1, 0]]) / np.sqrt(2)
    geom = SystemGeometry(b=sq, L=0.8)
    s = LoadState.at_rest()
    for _ in range(1000):
        s = load_step(s, np.zeros((4, 3)), geom, 0.0, dt)
    fall = abs(s.v[2] + 9.81)

    balanced = np.tile([0, 0, 9.81 / 4], (4, 1))
    w0 = np.array([0.3, -1.2, 2.0])
    s = LoadState(p=np.zeros(3), R=np.eye(3), v=np.zeros(3), omega=w0)
    for _ in range(1000):
        s = load_step(s, balanced, geom, 0.0, dt)
    spin = np.abs(s.omega - w0).max()

    hang_geom = SystemGeometry(b=[[0, 0, 0], [0.4, 0, 0], [0, 0.4, 0]], L=0.8)
    F = np.zeros((3, 3))
    F[0] = [0, 0, 9.81]
    s = LoadState.at_rest()
    for _ in range(1000):
        s = load_step(s, F, hang_geom, 0.7, dt)
    hang = max(np.abs(s.p).max(), np.abs(s.v).max())

    J = np.diag([0.01, 0.02, 0.03])
    g3 = SystemGeometry(b=sq, L=0.8, J_L=J)
    s = LoadState(p=np.zeros(3), R=np.eye(3), v=np.array([0.2, -0.1, 0.05]),
                  omega=np.array([1.0, 3.0, -2.0]))
    energy = lambda st: 0.5 * st.v @ st.v + 0.5 * st.omega @ J @ st.omega
    E0 = energy(s)
    for _ in range(10_000):
        s = load_step(s, balanced, g3, 0.0, dt, B_ang=0.0)
    drift = abs(energy(s) - E0) / E0
    ok = fall < 1e-9 and spin < 1e-12 and hang < 1e-12 and drift < 1e-3
    record(10, "physics sanity at dt=1e-3", ok,
           f"free fall |v_z+g| {fall:.1e}, spin drift {spin:.1e}, hang drift {hang:.1e}, "
           f"energy drift {100 * drift:.2e} % (< 0.1 %)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
