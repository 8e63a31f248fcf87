import numpy as np
import pytest
from hypothesis import given, strategies as st

from nonstop_transport.controller import (ControllerGains, TrackingError, WrenchController,
                                          compute_errors, wrench_pid)
from nonstop_transport.model import LoadState, SystemGeometry
from nonstop_transport.so3 import rot_z
from nonstop_transport.trajectory import DesiredLoadSample

from conftest import rotations, vec3

GEOM = SystemGeometry(b=[[0.4, 0, 0], [-0.2, 0.3, 0], [-0.2, -0.3, 0]], L=0.8)


def ref_at(p=(0, 0, 0), R=None, v=(0, 0, 0), w=(0, 0, 0)):
    return DesiredLoadSample(p=np.array(p, float), v=np.array(v, float), a=np.zeros(3),
                             R=np.eye(3) if R is None else R, omega=np.array(w, float))


def test_perfect_tracking_gives_zero_error():
    err = compute_errors(LoadState.at_rest(), ref_at())
    for name in ("e_p", "e_v", "e_R", "e_w", "int_e_p", "int_e_R"):
        assert not getattr(err, name).any()


def test_yaw_error_is_sin_theta():
    R_d = rot_z(0.4)
    state = LoadState(p=np.zeros(3), R=R_d @ rot_z(0.1), v=np.zeros(3), omega=np.zeros(3))
    # 0.5 vee(Rz(θ) - Rz(θ)^T) = (0, 0, sin θ)
    assert np.allclose(compute_errors(state, ref_at(R=R_d)).e_R, [0, 0, np.sin(0.1)], atol=1e-15)


def test_position_error_definition():
    state = LoadState(p=[1.0, 0, 0], R=np.eye(3), v=np.zeros(3), omega=np.zeros(3))
    assert np.allclose(compute_errors(state, ref_at()).e_p, [1, 0, 0])


@given(rotations(), rotations())
def test_attitude_error_bounded(R, R_d):
    state = LoadState(p=np.zeros(3), R=R, v=np.zeros(3), omega=np.zeros(3))
    assert np.linalg.norm(compute_errors(state, ref_at(R=R_d)).e_R) <= 1.0 + 1e-12


def test_rate_error_uses_body_frame_reference():
    R = rot_z(np.pi / 2)
    w_world = np.array([1.0, 0.0, 0.0])
    state = LoadState(p=np.zeros(3), R=R, v=np.zeros(3), omega=R.T @ w_world)
    assert np.allclose(compute_errors(state, ref_at(R=R, w=w_world)).e_w, 0.0, atol=1e-15)


def test_hover_feedforward():
    w = wrench_pid(TrackingError.zero(), LoadState.at_rest(), ControllerGains(), GEOM)
    assert np.array_equal(w.f, [0, 0, GEOM.m_L * GEOM.g])
    assert np.array_equal(w.tau, np.zeros(3))


def test_gyroscopic_term_axis_aligned():
    geom = SystemGeometry(b=GEOM.b, L=0.8, J_L=np.diag([1.0, 2.0, 3.0]))
    state = LoadState(p=np.zeros(3), R=np.eye(3), v=np.zeros(3), omega=[0, 0, 1.0])
    assert np.allclose(wrench_pid(TrackingError.zero(), state, ControllerGains(), geom).tau, 0.0)


def test_position_gain_contribution():
    z = np.zeros(3)
    err = TrackingError(np.array([1.0, 0, 0]), z, z, z, z, z)
    w = wrench_pid(err, LoadState.at_rest(), ControllerGains(), GEOM)
    assert np.allclose(w.f - GEOM.m_L * GEOM.g * np.array([0, 0, 1]), [-5, 0, 0])


@given(st.lists(vec3, min_size=6, max_size=6), st.floats(-3, 3))
def test_wrench_is_affine(errs, s):
    def w(e):
        return wrench_pid(TrackingError(*e), LoadState.at_rest(), ControllerGains(), GEOM).as_vector()

    zero = [np.zeros(3)] * 6
    w0 = w(zero)
    scaled = [s * e for e in errs]
    assert np.allclose(w(scaled) - w0, s * (w(errs) - w0), atol=1e-9)


@given(st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100), st.floats(-100, 100)),
                min_size=1, max_size=40))
def test_integrals_clamped(offsets):
    ctrl = WrenchController(ControllerGains(), GEOM)
    for k, off in enumerate(offsets):
        state = LoadState(p=np.array(off), R=np.eye(3), v=np.zeros(3), omega=np.zeros(3))
        err, _ = ctrl.update(0.05 * k, state, ref_at())
        assert np.abs(err.int_e_p).max() <= 2.0
        assert np.abs(err.int_e_R).max() <= 1.0


def test_trapezoidal_integral():
    ctrl = WrenchController(ControllerGains(), GEOM)
    for k, x in enumerate([0.0, 0.1, 0.2]):
        state = LoadState(p=[x, 0, 0], R=np.eye(3), v=np.zeros(3), omega=np.zeros(3))
        err, _ = ctrl.update(0.5 * k, state, ref_at())
    assert err.int_e_p[0] == pytest.approx(0.5 * 0.5 * (0.0 + 0.1) + 0.5 * 0.5 * (0.1 + 0.2))


def test_gains_accept_vectors():
    g = ControllerGains(K_p=[1.0, 2.0, 3.0])
    assert np.array_equal(g.K_p, np.diag([1.0, 2.0, 3.0]))
    with pytest.raises(ValueError):
        ControllerGains(K_v=-1.0)
