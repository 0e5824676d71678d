"""Motion compensation segments and the position/force safety monitor.

Predicted displacement is chopped into short fixed-duration segments,
each executed as a trapezoidal velocity profile that starts and ends at
rest, and superposed on the feed motion.  The acceleration rule is
"ten times the peak velocity per unit time"; with the default 125 ms
segments the pure rule (accel = 10*v per second, ramp time 0.1 s) is
infeasible, so it degrades to accel = 10*v / duration, i.e. a ramp of
one tenth of the segment on each side.  Both rules and the switch point
are fixed constants below.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

SEGMENT_DURATION_S = 0.125
ACCEL_VELOCITY_RATIO = 10.0  # accel = 10 * v (per second) when feasible
RAMP_FRACTION = 0.1          # fallback: ramp time = duration / 10 per side


class InfeasibleProfileError(ValueError):
    pass


@dataclass(frozen=True)
class MotionSegment:
    """One rest-to-rest trapezoidal move.

    velocity(t) ramps 0 -> peak_velocity in ramp_time, cruises, ramps
    back to 0; the integral over the duration equals distance exactly.
    """

    t_start: float
    duration: float
    distance: float
    peak_velocity: float
    acceleration: float

    @property
    def ramp_time(self) -> float:
        if self.acceleration == 0.0:
            return 0.0
        return abs(self.peak_velocity / self.acceleration)

    def velocity(self, t_local: float) -> float:
        """Signed velocity at time t_local since segment start."""
        if t_local < 0.0 or t_local > self.duration or self.peak_velocity == 0.0:
            return 0.0
        tr = self.ramp_time
        if t_local < tr:
            return self.acceleration * t_local
        if t_local <= self.duration - tr:
            return self.peak_velocity
        return self.acceleration * (self.duration - t_local)

    def displacement(self, t_local: float) -> float:
        """Signed distance covered by time t_local since segment start."""
        if t_local <= 0.0 or self.peak_velocity == 0.0:
            return 0.0
        t = min(t_local, self.duration)
        tr = self.ramp_time
        v, a = self.peak_velocity, self.acceleration
        if t < tr:
            return 0.5 * a * t * t
        d = 0.5 * v * tr
        if t <= self.duration - tr:
            return d + v * (t - tr)
        d += v * (self.duration - 2.0 * tr)
        dt = t - (self.duration - tr)
        return d + v * dt - 0.5 * a * dt * dt


def trapezoid_profile(distance: float, duration: float = SEGMENT_DURATION_S,
                      t_start: float = 0.0) -> MotionSegment:
    """Solve the rest-to-rest profile covering ``distance`` in ``duration``.

    distance = v * (duration - ramp_time).  Under the pure rule
    accel = 10*v the ramp is a fixed 0.1 s, used whenever it fits twice
    into the duration; otherwise accel = 10*v/duration keeps the shape
    feasible at any duration.
    """
    if not np.isfinite(distance):
        raise InfeasibleProfileError(f"distance must be finite, got {distance}")
    if duration <= 0.0:
        raise InfeasibleProfileError(f"duration must be > 0, got {duration}")
    if distance == 0.0:
        return MotionSegment(t_start, duration, 0.0, 0.0, 0.0)
    pure_ramp = 1.0 / ACCEL_VELOCITY_RATIO
    if duration > 2.0 * pure_ramp:
        v = distance / (duration - pure_ramp)
        a = ACCEL_VELOCITY_RATIO * v
    else:
        v = distance / (duration * (1.0 - RAMP_FRACTION))
        a = v / (RAMP_FRACTION * duration)
    return MotionSegment(t_start, duration, distance, v, a)


def segment_displacement(times: np.ndarray, positions: np.ndarray,
                         period: float = SEGMENT_DURATION_S) -> list[MotionSegment]:
    """One segment per period covering the position change over it.

    The input series must be sampled at or above 1/period; positions are
    linearly interpolated onto the period grid, so the concatenated
    segment endpoints match the prediction at every boundary.
    """
    times = np.asarray(times, dtype=float)
    positions = np.asarray(positions, dtype=float)
    if len(times) == 0:
        raise ValueError("empty prediction series")
    if len(times) != len(positions):
        raise ValueError("times and positions must have equal length")
    n_segments = int(np.floor((times[-1] - times[0]) / period + 1e-9))
    if n_segments < 1:
        raise ValueError("series shorter than one segment period")
    grid = times[0] + period * np.arange(n_segments + 1)
    on_grid = np.interp(grid, times, positions)
    return [
        trapezoid_profile(on_grid[k + 1] - on_grid[k], period, t_start=float(grid[k]))
        for k in range(n_segments)
    ]


class CompensationTrack:
    """Evaluates the superposed segment trajectory at arbitrary times."""

    def __init__(self, segments: list[MotionSegment]):
        self.segments = segments
        self._starts = np.array([s.t_start for s in segments])
        self._cum = np.concatenate([[0.0], np.cumsum([s.distance for s in segments])])

    def position(self, t: float) -> float:
        """Accumulated compensation offset at absolute time t."""
        if not self.segments or t <= self._starts[0]:
            return 0.0
        i = int(np.searchsorted(self._starts, t, side="right")) - 1
        seg = self.segments[i]
        return float(self._cum[i]) + seg.displacement(t - seg.t_start)

    def velocity(self, t: float) -> float:
        if not self.segments or t < self._starts[0]:
            return 0.0
        i = int(np.searchsorted(self._starts, t, side="right")) - 1
        seg = self.segments[i]
        return seg.velocity(t - seg.t_start)


@dataclass(frozen=True)
class MonitorConfig:
    """Safety thresholds: position deviation (mm) and thrust force (N)."""

    h1_mm: float = 1.2
    h2_n: float = 10.0

    def __post_init__(self):
        if self.h1_mm <= 0 or self.h2_n <= 0:
            raise ValueError("monitor thresholds must be > 0")


class AbortReason(Enum):
    POSITION_DEVIATION = "position_deviation"
    FORCE_LIMIT = "force_limit"


@dataclass(frozen=True)
class MonitorVerdict:
    ok: bool
    reason: AbortReason | None = None


def monitor(position_error_mm: float, force_n: float, cfg: MonitorConfig) -> MonitorVerdict:
    """Stateless per-sample safety check; the caller latches aborts."""
    if abs(position_error_mm) > cfg.h1_mm:
        return MonitorVerdict(ok=False, reason=AbortReason.POSITION_DEVIATION)
    if abs(force_n) > cfg.h2_n:
        return MonitorVerdict(ok=False, reason=AbortReason.FORCE_LIMIT)
    return MonitorVerdict(ok=True)
