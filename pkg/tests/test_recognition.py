"""Force feature math, self-calibration, and the key-point state machine."""

import numpy as np
import pytest

from respdrill.recognition import (
    Calibration,
    CalibrationTimeout,
    Decision,
    Phase,
    Recognizer,
    RecognizerConfig,
    RecognizerState,
    calibrate,
    feature,
    modified_feature,
    moving_average,
    step,
)

CFG = RecognizerConfig()


def synthetic_force_trace(seed=0, n=400, peak=5.0, cancellous=1.0, rise_at=300):
    """Contact ramp -> cortical peak -> drop to cancellous -> inner rise."""
    rng = np.random.default_rng(seed)
    f = np.empty(n)
    f[:60] = np.linspace(0.0, peak, 60)
    f[60:140] = peak + rng.normal(0, 0.05, 80)
    f[140:160] = np.linspace(peak, cancellous, 20)
    f[160:rise_at] = cancellous + rng.normal(0, 0.15, rise_at - 160)
    f[rise_at:] = np.linspace(cancellous, peak * 1.05, n - rise_at)
    return f


def brute_force_calibration_index(f_bar, cfg):
    """Independent scan of the drop predicate."""
    f_max = 0.0
    for i, f in enumerate(f_bar, start=1):
        f_max = max(f_max, f)
        if f_max > cfg.min_calibration_force and f < cfg.drop_ratio * f_max:
            return i
    return None


def test_moving_average_constant_and_identity():
    assert moving_average([3.0] * 12, 10) == pytest.approx([3.0] * 12)
    values = [1.0, -2.0, 5.0, 0.5]
    assert moving_average(values, 1) == pytest.approx(values)


def test_moving_average_window_mean():
    out = moving_average(list(range(1, 21)), 10)
    assert out[-1] == pytest.approx(15.5)  # mean of 11..20
    assert out[0] == pytest.approx(1.0)    # prefix uses available samples
    assert out[4] == pytest.approx(3.0)    # mean of 1..5


def test_calibrate_ramp_then_drop():
    stream = list(np.linspace(0.0, 5.0, 50)) + [1.0, 1.0]
    cfg = RecognizerConfig(drop_ratio=0.5, min_calibration_force=1.0)
    cal = calibrate(stream, cfg)
    assert cal.k == 51  # first sample below 2.5 N after the 5 N peak
    assert cal.f_max == pytest.approx(5.0)
    assert cal.d == pytest.approx(5.0)  # min is the 0.0 start


def test_calibrate_monotone_stream_times_out():
    with pytest.raises(CalibrationTimeout):
        calibrate(np.linspace(0, 10, 500), RecognizerConfig(calibration_budget=500))


def test_calibrate_below_force_gate_never_fires():
    # peak 0.5 N below the 1 N gate: the later drop must not calibrate
    stream = list(np.linspace(0, 0.5, 20)) + [0.1] * 20
    with pytest.raises(CalibrationTimeout):
        calibrate(stream, RecognizerConfig(calibration_budget=40))


def test_calibration_matches_bruteforce_on_synthetic_traces():
    for seed in range(20):
        raw = synthetic_force_trace(seed=seed)
        f_bar = moving_average(raw, CFG.window)
        expected = brute_force_calibration_index(f_bar, CFG)
        assert expected is not None
        cal = calibrate(f_bar, CFG)
        assert cal.k == expected
        assert cal.d == pytest.approx(max(f_bar[:cal.k]) - min(f_bar[:cal.k]))


def test_feature_branches():
    cal = Calibration(k=10, d=4.0, f_max=4.5, f_min=0.5)
    assert feature(cal.f_min + cal.d, cal) == pytest.approx(cal.d)       # f* = 1
    assert feature(cal.f_min + 0.5 * cal.d, cal) == pytest.approx(0.125 * cal.d)
    assert feature(cal.f_min - 0.2 * cal.d, cal) == 0.0                   # f* < 0
    assert feature(cal.f_min + 2.0 * cal.d, cal) == pytest.approx(cal.d)  # clamped


def test_feature_monotone_and_bounded():
    cal = Calibration(k=5, d=3.0, f_max=3.2, f_min=0.2)
    forces = np.linspace(-1.0, 6.0, 200)
    values = [feature(f, cal) for f in forces]
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))
    assert all(0.0 <= v <= cal.d for v in values)


def test_modified_feature_gain_branches():
    cal = Calibration(k=10, d=2.0, f_max=2.5, f_min=0.5)
    cfg = RecognizerConfig(gain=1.2, gain_threshold=0.5)
    assert modified_feature(0.4 * cal.d, cal, cfg) == pytest.approx(0.4 * cal.d)
    assert modified_feature(0.6 * cal.d, cal, cfg) == pytest.approx(1.2 * 0.6 * cal.d)
    assert modified_feature(1.0 * cal.d, cal, cfg) == pytest.approx(1.2 * cal.d)


def run_sequence(a_stars, cfg=CFG):
    state = RecognizerState(phase=Phase.OUTER_BREAKTHROUGH, last_key_point=2)
    decisions = []
    for a in a_stars:
        state, decision = step(state, a, cfg)
        decisions.append(decision)
    return state, decisions


def test_step_outer_to_cancellous():
    state, decisions = run_sequence([0.9, 0.3])
    assert state.phase is Phase.CANCELLOUS
    assert decisions == [Decision.CONTINUE, Decision.CONTINUE]


def test_step_full_passage_to_stop():
    seq = [0.9, 0.3, 0.1, 0.05, 0.75, 0.75, 0.75]
    state, decisions = run_sequence(seq)
    assert state.phase is Phase.STOP_ISSUED
    assert decisions[-1] is Decision.STOP
    assert decisions[-2] is Decision.CONTINUE


def test_step_midband_never_stops():
    rng = np.random.default_rng(0)
    seq = rng.uniform(0.41, 0.69, 500)
    state, decisions = run_sequence(seq.tolist())
    assert state.phase is Phase.OUTER_BREAKTHROUGH
    assert all(d is Decision.CONTINUE for d in decisions)


def test_step_confirmation_count_suppresses_spikes():
    # single-sample spikes above the stop gate must not stop
    seq = [0.9, 0.3, 0.75, 0.2, 0.75, 0.2, 0.75, 0.2]
    state, decisions = run_sequence(seq)
    assert state.phase is Phase.INNER_RISING
    assert Decision.STOP not in decisions


def test_step_missed_window_fails_after_persistent_drop():
    # rise past the gate, then a persistent proportional drop: the inner
    # layer was punctured before the stop confirmed
    seq = [0.9, 0.3, 0.8, 0.1, 0.1, 0.1]
    state, decisions = run_sequence(seq)
    assert state.phase is Phase.FAILED
    assert decisions[-1] is Decision.FAIL


def test_step_requires_calibration():
    with pytest.raises(ValueError):
        step(RecognizerState(), 0.5, CFG)


def test_state_machine_never_revisits_phases():
    order = [Phase.CALIBRATING, Phase.OUTER_BREAKTHROUGH, Phase.CANCELLOUS,
             Phase.INNER_RISING, Phase.STOP_ISSUED, Phase.FAILED]
    rng = np.random.default_rng(5)
    for seed in range(10):
        rec = Recognizer(CFG)
        raw = synthetic_force_trace(seed=seed)
        indices = []
        for f in raw:
            rec.push(float(f))
            indices.append(order.index(rec.state.phase))
        assert all(b >= a for a, b in zip(indices, indices[1:]))


def stop_index(raw, cfg=CFG):
    rec = Recognizer(cfg)
    for i, f in enumerate(raw):
        if rec.push(float(f)) is Decision.STOP:
            return i
    return None


def test_scale_invariance_of_stop_index():
    raw = synthetic_force_trace(seed=3)
    base = stop_index(raw)
    assert base is not None
    for lam in (0.5, 2.0, 10.0):
        assert stop_index(lam * raw) == base


def test_streaming_recognizer_matches_offline_pipeline():
    raw = synthetic_force_trace(seed=4)
    rec = Recognizer(CFG)
    for f in raw:
        rec.push(float(f))
        if rec.state.phase in (Phase.STOP_ISSUED, Phase.FAILED):
            break
    f_bar = moving_average(raw, CFG.window)
    cal = calibrate(f_bar, CFG)
    assert rec.calibration is not None
    assert rec.calibration.k == cal.k
    assert rec.calibration.d == pytest.approx(cal.d)
    # replay the state machine offline from the calibration point
    state = RecognizerState(phase=Phase.OUTER_BREAKTHROUGH, last_key_point=2)
    for i in range(cal.k, len(f_bar)):
        a_star = modified_feature(feature(f_bar[i], cal), cal, CFG) / cal.d
        state, decision = step(state, a_star, CFG)
        if decision is not Decision.CONTINUE:
            break
    assert state.phase is rec.state.phase


def test_recognizer_reproducible_and_decision_log():
    raw = synthetic_force_trace(seed=6)
    rec1, rec2 = Recognizer(CFG), Recognizer(CFG)
    d1 = [rec1.push(float(f)) for f in raw]
    d2 = [rec2.push(float(f)) for f in raw]
    assert d1 == d2
    assert len(rec1.log) == len(raw)
    assert [r.phase for r in rec1.log] == [r.phase for r in rec2.log]


def test_abort_is_terminal():
    rec = Recognizer(CFG)
    rec.push(0.5)
    assert rec.abort() is Decision.FAIL
    assert rec.state.phase is Phase.FAILED
    assert rec.push(5.0) is Decision.FAIL


def test_config_validation():
    with pytest.raises(ValueError):
        RecognizerConfig(window=0)
    with pytest.raises(ValueError):
        RecognizerConfig(gain=1.0)
    with pytest.raises(ValueError):
        RecognizerConfig(c1=1.5)
    with pytest.raises(ValueError):
        RecognizerConfig(drop_ratio=0.0)
