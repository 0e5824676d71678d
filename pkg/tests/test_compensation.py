"""Trapezoidal segments and the safety monitor."""

import numpy as np
import pytest

from respdrill.compensation import (
    AbortReason,
    CompensationTrack,
    InfeasibleProfileError,
    MonitorConfig,
    MotionSegment,
    SEGMENT_DURATION_S,
    monitor,
    segment_displacement,
    trapezoid_profile,
)


def integrate_velocity(seg: MotionSegment, rate_hz: float = 10000.0) -> float:
    """Quadrature oracle over the emitted velocity profile."""
    ts = np.linspace(0.0, seg.duration, int(seg.duration * rate_hz) + 1)
    vs = np.array([seg.velocity(float(t)) for t in ts])
    return float(np.sum(0.5 * (vs[1:] + vs[:-1]) * np.diff(ts)))


def test_zero_distance_gives_zero_profile():
    seg = trapezoid_profile(0.0)
    assert seg.peak_velocity == 0.0 and seg.acceleration == 0.0
    assert seg.velocity(0.06) == 0.0
    assert seg.displacement(seg.duration) == 0.0


def test_profile_quadrature_oracle():
    seg = trapezoid_profile(0.5, 0.125)
    assert integrate_velocity(seg) == pytest.approx(0.5, abs=1e-6)
    assert seg.displacement(seg.duration) == pytest.approx(0.5, abs=1e-9)


def test_profile_integral_invariant_random_segments():
    rng = np.random.default_rng(20)
    for _ in range(100):
        d = float(rng.uniform(-2.0, 2.0))
        dur = float(rng.choice([0.125, 0.05, 0.3, 1.0]))
        seg = trapezoid_profile(d, dur)
        assert seg.displacement(seg.duration) == pytest.approx(d, abs=1e-9)
        assert seg.velocity(0.0) == 0.0
        assert seg.velocity(seg.duration) == pytest.approx(0.0, abs=1e-12)


def test_mirror_symmetry():
    a = trapezoid_profile(0.7, 0.125)
    b = trapezoid_profile(-0.7, 0.125)
    for t in np.linspace(0, 0.125, 23):
        assert a.velocity(float(t)) == pytest.approx(-b.velocity(float(t)), abs=1e-12)


def test_acceleration_rule_branches():
    # short segment: ramp is a tenth of the duration on each side
    short = trapezoid_profile(0.5, 0.125)
    assert short.ramp_time == pytest.approx(0.0125)
    assert short.acceleration == pytest.approx(10.0 * short.peak_velocity / 0.125)
    # long segment: the pure rule accel = 10 * v applies (0.1 s ramps)
    long = trapezoid_profile(2.0, 1.0)
    assert long.acceleration == pytest.approx(10.0 * long.peak_velocity)
    assert long.ramp_time == pytest.approx(0.1)


def test_infeasible_inputs():
    with pytest.raises(InfeasibleProfileError):
        trapezoid_profile(1.0, 0.0)
    with pytest.raises(InfeasibleProfileError):
        trapezoid_profile(float("nan"), 0.125)


def test_segment_displacement_constant_series():
    t = np.arange(0.0, 2.0, 0.01)
    segs = segment_displacement(t, np.full_like(t, 1.5))
    assert len(segs) == 16
    assert all(s.distance == 0.0 for s in segs)


def test_segment_displacement_linear_drift():
    v = 0.8  # mm/s
    t = np.arange(0.0, 2.0, 0.01)
    segs = segment_displacement(t, v * t)
    for s in segs:
        assert s.distance == pytest.approx(0.125 * v, abs=1e-9)


def test_segment_endpoints_track_breathing_scale_sinusoid():
    t = np.arange(0.0, 10.0, 0.01)
    pos = 2.0 * np.sin(2 * np.pi * 0.2 * t)  # 4 mm peak-to-peak at 0.2 Hz
    segs = segment_displacement(t, pos)
    track = CompensationTrack(segs)
    for s in segs:
        end = s.t_start + s.duration
        analytic = 2.0 * np.sin(2 * np.pi * 0.2 * end) - pos[0]
        assert abs(track.position(end + 1e-12) - analytic) < 0.05


def test_track_is_continuous_and_rests_at_boundaries():
    t = np.arange(0.0, 5.0, 0.005)
    pos = 1.7 * np.sin(2 * np.pi * 0.25 * t)
    track = CompensationTrack(segment_displacement(t, pos))
    for s in track.segments:
        assert track.velocity(s.t_start) == pytest.approx(0.0, abs=1e-12)
        before = track.position(s.t_start - 1e-9)
        after = track.position(s.t_start + 1e-9)
        assert after == pytest.approx(before, abs=1e-6)


def test_segment_displacement_errors():
    with pytest.raises(ValueError):
        segment_displacement(np.array([]), np.array([]))
    with pytest.raises(ValueError):
        segment_displacement(np.array([0.0, 0.05]), np.array([0.0, 1.0]))


def test_monitor_examples():
    cfg = MonitorConfig()
    assert monitor(0.5, 5.0, cfg).ok
    v = monitor(1.3, 5.0, cfg)
    assert not v.ok and v.reason is AbortReason.POSITION_DEVIATION
    v = monitor(0.5, 11.0, cfg)
    assert not v.ok and v.reason is AbortReason.FORCE_LIMIT
    # boundary: thresholds are strict inequalities
    assert monitor(1.2, 10.0, cfg).ok


def test_monitor_monotone():
    cfg = MonitorConfig()
    rng = np.random.default_rng(21)
    for _ in range(200):
        e, f = rng.uniform(0, 2.0), rng.uniform(0, 12.0)
        if not monitor(e, f, cfg).ok:
            assert not monitor(e + 0.5, f, cfg).ok
            assert not monitor(e, f + 2.0, cfg).ok


def test_monitor_uses_magnitudes():
    cfg = MonitorConfig()
    assert not monitor(-1.3, 0.0, cfg).ok
    assert not monitor(0.0, -11.0, cfg).ok


def test_monitor_config_validation():
    with pytest.raises(ValueError):
        MonitorConfig(h1_mm=0.0)
