"""Thrust-force drilling state recognition.

The raw thrust force is moving-averaged, normalized against the outer
cortical passage found by the self-calibration scan (running maximum
followed by the first proportional drop), cubed into a fluctuation-
suppressing feature, and gain-boosted in its upper range.  A six-key-
point state machine walks outer breakthrough -> cancellous -> inner
rise and issues the stop decision while the force still climbs inside
the inner cortical layer.

Key-point mapping used here (a reconstruction; the exact per-threshold
assignment is not uniquely specified by the source material): finishing
calibration corresponds to passing key point 2 (outer breakthrough),
the C1 crossing confirms the cancellous passage (point 3), the C2
crossing marks arrival at the inner cortical surface (point 4), and the
confirmed C3 dwell issues the stop between points 4 and 6.  A
proportional feature drop inside the inner layer means the breakthrough
(point 6) was passed and the stop window is missed.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum


@dataclass(frozen=True)
class RecognizerConfig:
    window: int = 10                 # moving-average length
    gain: float = 1.2                # high-range feature gain
    gain_threshold: float = 0.5      # normalized feature level above which gain applies
    c1: float = 0.4                  # cancellous confirmation threshold (falling)
    c2: float = 0.7                  # inner-surface arrival threshold (rising)
    c3: float = 0.7                  # stop-gate threshold (rising, confirmed)
    drop_ratio: float = 0.5          # proportional drop that ends calibration
    min_calibration_force: float = 1.0   # N; running max must exceed this first
    confirmation_count: int = 3      # consecutive samples >= c3 required to stop
    calibration_budget: int = 100000  # samples before calibration times out

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.gain <= 1.0:
            raise ValueError("gain must be > 1")
        if not 0.0 < self.gain_threshold < 1.0:
            raise ValueError("gain_threshold must lie in (0, 1)")
        for name in ("c1", "c2", "c3"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if not 0.0 < self.drop_ratio < 1.0:
            raise ValueError("drop_ratio must lie in (0, 1)")
        if self.min_calibration_force <= 0.0:
            raise ValueError("min_calibration_force must be > 0")


@dataclass(frozen=True)
class Calibration:
    """Outer-cortical passage summary fixed at the calibration drop."""

    k: int           # sample index of the first drop
    d: float         # force span F_max - f_min (N)
    f_max: float
    f_min: float

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError("calibration span D must be > 0")


class CalibrationTimeout(RuntimeError):
    pass


class Phase(Enum):
    CALIBRATING = "calibrating"
    OUTER_BREAKTHROUGH = "outer_breakthrough"
    CANCELLOUS = "cancellous"
    INNER_RISING = "inner_rising"
    STOP_ISSUED = "stop_issued"
    FAILED = "failed"


class Decision(Enum):
    CONTINUE = "continue"
    STOP = "stop"
    FAIL = "fail"


def moving_average(values, n: int):
    """Trailing mean of the last n samples; the first n-1 outputs use the
    available prefix so streaming starts without a gap."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out = []
    acc = 0.0
    buf: deque = deque()
    for v in values:
        buf.append(v)
        acc += v
        if len(buf) > n:
            acc -= buf.popleft()
        out.append(acc / len(buf))
    return out


def calibrate(f_bar, cfg: RecognizerConfig) -> Calibration:
    """Scan an averaged-force stream for the end of the outer cortical
    passage: the first sample below drop_ratio * running max, with the
    running max already above min_calibration_force."""
    f_max = 0.0
    f_min = float("inf")
    for i, f in enumerate(f_bar, start=1):
        if i > cfg.calibration_budget:
            break
        if f > f_max:
            f_max = f
        if f < f_min:
            f_min = f
        if f_max > cfg.min_calibration_force and f < cfg.drop_ratio * f_max:
            return Calibration(k=i, d=f_max - f_min, f_max=f_max, f_min=f_min)
    raise CalibrationTimeout(
        "no proportional force drop found; the stream never entered bone "
        "or the drop ratio is set wrong"
    )


def feature(f_bar_i: float, cal: Calibration) -> float:
    """Cubic fluctuation-suppressing feature (N).

    The force is normalized to the calibration span; the cube keeps the
    cortical range while crushing small cancellous fluctuations.
    """
    f_star = (f_bar_i - cal.f_min) / cal.d
    if f_star > 1.0:
        return cal.d
    if f_star < 0.0:
        return 0.0
    return cal.d * f_star**3


def modified_feature(a_i: float, cal: Calibration, cfg: RecognizerConfig) -> float:
    """Gain-boost the high-value part of the feature curve.

    The comparison runs on the normalized feature a_i / D so behavior is
    invariant to the absolute force scale."""
    if a_i / cal.d > cfg.gain_threshold:
        return cfg.gain * a_i
    return a_i


@dataclass(frozen=True)
class RecognizerState:
    phase: Phase = Phase.CALIBRATING
    last_key_point: int = 1
    peak_since_rising: float = 0.0
    confirm_streak: int = 0
    drop_streak: int = 0


def step(state: RecognizerState, a_star: float, cfg: RecognizerConfig) -> tuple[RecognizerState, Decision]:
    """Advance the key-point state machine by one normalized feature sample.

    a_star is the gain-modified feature divided by the calibration span
    (unit scale, up to gain * 1.0).  Stop and Fail are terminal.
    """
    phase = state.phase
    if phase in (Phase.STOP_ISSUED, Phase.FAILED):
        return state, Decision.STOP if phase is Phase.STOP_ISSUED else Decision.FAIL
    if phase is Phase.CALIBRATING:
        raise ValueError("step requires a completed calibration (phase >= outer breakthrough)")

    if phase is Phase.OUTER_BREAKTHROUGH:
        if a_star < cfg.c1:
            return replace(state, phase=Phase.CANCELLOUS, last_key_point=3), Decision.CONTINUE
        return state, Decision.CONTINUE

    if phase is Phase.CANCELLOUS:
        if a_star >= cfg.c2:
            return (
                replace(
                    state,
                    phase=Phase.INNER_RISING,
                    last_key_point=4,
                    peak_since_rising=a_star,
                    confirm_streak=1 if a_star >= cfg.c3 else 0,
                ),
                Decision.CONTINUE,
            )
        return state, Decision.CONTINUE

    # INNER_RISING
    peak = max(state.peak_since_rising, a_star)
    # post-peak proportional drop of the calibration kind: the inner layer
    # was punctured before the stop confirmed -> window missed; debounced
    # by the same confirmation count that guards the stop gate so that
    # single-sample dips do not end the run
    drop_streak = (
        state.drop_streak + 1 if peak >= cfg.c3 and a_star < cfg.drop_ratio * peak else 0
    )
    if drop_streak >= cfg.confirmation_count:
        return (
            replace(state, phase=Phase.FAILED, last_key_point=6, peak_since_rising=peak, drop_streak=drop_streak),
            Decision.FAIL,
        )
    streak = state.confirm_streak + 1 if a_star >= cfg.c3 else 0
    if streak >= cfg.confirmation_count:
        return (
            replace(state, phase=Phase.STOP_ISSUED, last_key_point=5, peak_since_rising=peak, confirm_streak=streak),
            Decision.STOP,
        )
    return replace(state, peak_since_rising=peak, confirm_streak=streak, drop_streak=drop_streak), Decision.CONTINUE


@dataclass
class LogRecord:
    index: int
    f_bar: float
    a_star: float
    phase: Phase
    decision: Decision


class Recognizer:
    """Streaming wrapper: raw force samples in, decisions out.

    Single-owner: one producer feeds samples in order.  Runs the moving
    average, the calibration scan, the feature pipeline and the state
    machine; keeps a per-sample decision log for offline replay.
    """

    def __init__(self, cfg: RecognizerConfig = RecognizerConfig()):
        self.cfg = cfg
        self.state = RecognizerState()
        self.calibration: Calibration | None = None
        self._buf: deque = deque()
        self._acc = 0.0
        self._run_max = 0.0
        self._run_min = float("inf")
        self._index = 0
        self.log: list[LogRecord] = []

    def push(self, force_n: float) -> Decision:
        """Feed one raw force sample; returns the current decision."""
        self._index += 1
        self._buf.append(force_n)
        self._acc += force_n
        if len(self._buf) > self.cfg.window:
            self._acc -= self._buf.popleft()
        f_bar = self._acc / len(self._buf)

        a_star = float("nan")
        if self.state.phase in (Phase.STOP_ISSUED, Phase.FAILED):
            # terminal: the trace keeps flowing for logging, the state machine is frozen
            if self.calibration is not None:
                a_i = feature(f_bar, self.calibration)
                a_star = modified_feature(a_i, self.calibration, self.cfg) / self.calibration.d
            decision = Decision.STOP if self.state.phase is Phase.STOP_ISSUED else Decision.FAIL
            self.log.append(LogRecord(self._index, f_bar, a_star, self.state.phase, decision))
            return decision
        if self.calibration is None:
            if f_bar > self._run_max:
                self._run_max = f_bar
            if f_bar < self._run_min:
                self._run_min = f_bar
            if (
                self._run_max > self.cfg.min_calibration_force
                and f_bar < self.cfg.drop_ratio * self._run_max
            ):
                self.calibration = Calibration(
                    k=self._index,
                    d=self._run_max - self._run_min,
                    f_max=self._run_max,
                    f_min=self._run_min,
                )
                self.state = replace(self.state, phase=Phase.OUTER_BREAKTHROUGH, last_key_point=2)
            elif self._index > self.cfg.calibration_budget:
                self.state = replace(self.state, phase=Phase.FAILED)
                self.log.append(LogRecord(self._index, f_bar, a_star, self.state.phase, Decision.FAIL))
                return Decision.FAIL
            decision = Decision.CONTINUE
        else:
            a_i = feature(f_bar, self.calibration)
            a_star = modified_feature(a_i, self.calibration, self.cfg) / self.calibration.d
            self.state, decision = step(self.state, a_star, self.cfg)
        self.log.append(LogRecord(self._index, f_bar, a_star, self.state.phase, decision))
        return decision

    def abort(self) -> Decision:
        """Caller-injected failure (monitor abort); terminal."""
        if self.state.phase not in (Phase.STOP_ISSUED,):
            self.state = replace(self.state, phase=Phase.FAILED)
        return Decision.FAIL
