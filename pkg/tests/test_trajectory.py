import numpy as np
import pytest

from nonstop_transport.so3 import expm_so3, vee
from nonstop_transport.trajectory import (Hold, Move, TrajectorySpec, default_spec, quintic,
                                          sample)


def test_quintic_coefficients():
    # closed-form minimum-jerk blend 10s^3 - 15s^4 + 6s^5
    for s in np.linspace(0, 1, 11):
        v, d, dd = quintic(s)
        assert v == pytest.approx(10 * s**3 - 15 * s**4 + 6 * s**5)
        assert d == pytest.approx(30 * s**2 - 60 * s**3 + 30 * s**4)
        assert dd == pytest.approx(60 * s - 180 * s**2 + 120 * s**3)


def test_midpoint_of_one_metre_move():
    spec = TrajectorySpec(segments=(Move((1.0, 0, 0), 10.0),))
    s = sample(spec, 5.0)
    assert s.p[0] == pytest.approx(0.5)
    assert s.v[0] == pytest.approx(1.875 * 1.0 / 10.0)
    ts = np.linspace(0, 10, 2001)
    assert max(sample(spec, t).v[0] for t in ts) == pytest.approx(0.1875)


def test_holds_and_end():
    spec = default_spec()
    s = sample(spec, 2.0)
    assert np.array_equal(s.p, np.zeros(3)) and not s.v.any() and not s.a.any()
    end = sample(spec, 40.0)
    assert np.allclose(end.p, [1.5, 0, 0]) and not end.v.any()
    assert spec.duration == 25.0


def test_finite_differences():
    spec = TrajectorySpec(segments=(Hold(1.0), Move((1.0, -0.5, 0.3), 4.0, rotvec=(0, 0, 0.8)),
                                    Hold(1.0)))
    h = 1e-4
    # joints at 1 s and 5 s are skipped: the jerk jumps there
    for t in np.linspace(0.53, 5.47, 41):
        a, b, c = sample(spec, t - h), sample(spec, t), sample(spec, t + h)
        assert np.allclose((c.p - a.p) / (2 * h), b.v, atol=1e-6)
        assert np.allclose((c.v - a.v) / (2 * h), b.a, atol=1e-6)
        w_fd = vee((c.R - a.R) / (2 * h) @ b.R.T)
        assert np.allclose(w_fd, b.omega, atol=1e-6)


def test_joint_continuity():
    spec = default_spec()
    for t0, t1, _ in spec.boundaries():
        for t in (t0, t1):
            if t == 0:
                continue
            lo, hi = sample(spec, t - 1e-12), sample(spec, t + 1e-12)
            assert np.allclose(lo.p, hi.p, atol=1e-9)
            assert np.allclose(lo.v, hi.v, atol=1e-9)


def test_rotation_segment_ends_at_exp():
    spec = TrajectorySpec(segments=(Move((0, 0, 0), 2.0, rotvec=(0.2, 0, 0)),))
    assert np.allclose(sample(spec, 3.0).R, expm_so3([0.2, 0, 0]))


def test_invalid_specs():
    with pytest.raises(ValueError):
        TrajectorySpec(segments=())
    with pytest.raises(ValueError):
        TrajectorySpec(segments=(Hold(0.0),))
    with pytest.raises(ValueError):
        sample(default_spec(), -1.0)
