"""Closed-loop drilling trials on a synthetic layered bone.

The bone (outer cortical / cancellous / inner cortical) is translated
along the drilling axis by the breathing model; the drill feeds at a
constant rate, optionally superposing compensation segments planned
from the predicted displacement.  A velocity-proportional force plant
feeds the thrust-force recognizer, which issues the stop; the safety
monitor can abort on position deviation or force limit.  Trials are
deterministic given their seed, and batches aggregate success and
peak-force statistics.

The tool and bone trajectories are open loop (the stop decision only
truncates them), so a trial is computed as vectorized tick arrays and
the recognizer then walks the force blocks to find the stop index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .compensation import (
    AbortReason,
    CompensationTrack,
    MonitorConfig,
    SEGMENT_DURATION_S,
    segment_displacement,
)
from .motion import DisplacementModel
from .recognition import Decision, Recognizer, RecognizerConfig
from .respiration import (
    FlowCoefficients,
    VentilatorConfig,
    solve_flow_coefficients,
    tidal_volume_series,
)

REFERENCE_RPM = 12000.0


class Mode(Enum):
    STATIONARY = "stationary"
    MOVING_UNCOMPENSATED = "uncompensated"
    MOVING_COMPENSATED = "compensated"


@dataclass(frozen=True)
class BoneModel:
    """Layer thicknesses and the force-plant constants.

    Hardness maps cutting feed to thrust (N per mm/s); the cancellous
    layer adds a relative force fluctuation on top of the sensor noise
    floor.  Cutting feed saturates at the chip-load limit, a fixed
    amount of material per revolution: the cap in mm/s is
    max_cutting_feed_mm_s * rpm / 12000, so saturated burst forces sit
    at the same level for every spindle speed while steady cutting
    forces shrink with rpm.  The entry ramp scales force up over the
    first engagement_depth of penetration.
    """

    outer_cortical_mm: float = 3.0
    cancellous_mm: float = 15.0
    inner_cortical_mm: float = 2.11
    cortical_hardness: float = 7.0
    cancellous_hardness: float = 1.5
    cancellous_fluctuation: float = 0.25
    noise_floor_n: float = 0.05
    engagement_depth_mm: float = 0.5
    max_cutting_feed_mm_s: float = 1.2

    def __post_init__(self):
        if min(self.outer_cortical_mm, self.cancellous_mm, self.inner_cortical_mm) <= 0:
            raise ValueError("layer thicknesses must be > 0")
        if not self.cortical_hardness > self.cancellous_hardness:
            raise ValueError("cortical hardness must exceed cancellous hardness")

    @property
    def total_thickness_mm(self) -> float:
        return self.outer_cortical_mm + self.cancellous_mm + self.inner_cortical_mm

    @property
    def inner_start_mm(self) -> float:
        return self.outer_cortical_mm + self.cancellous_mm

    def feed_cap_mm_s(self, spindle_rpm: float) -> float:
        """Chip-load saturation expressed as a feed cap at this rpm."""
        return self.max_cutting_feed_mm_s * spindle_rpm / REFERENCE_RPM


def speed_factor(spindle_rpm: float) -> float:
    """Thrust scaling with spindle speed: higher rpm cuts thinner chips,
    lowering force while the absolute sensor noise stays unchanged."""
    return REFERENCE_RPM / spindle_rpm


@dataclass(frozen=True)
class FaultInjection:
    """Step offsets added to the monitored signals from time_s onward."""

    time_s: float
    position_offset_mm: float = 0.0
    force_offset_n: float = 0.0


@dataclass(frozen=True)
class TrialConfig:
    mode: Mode = Mode.STATIONARY
    feed_rate_mm_s: float = 0.5
    spindle_rpm: float = 12000.0
    tick_s: float = 0.0025
    ventilator: VentilatorConfig = VentilatorConfig()
    displacement: DisplacementModel = DisplacementModel(q1_ap=0.008)
    recognizer: RecognizerConfig = RecognizerConfig()
    monitor: MonitorConfig = MonitorConfig()
    bone: BoneModel = BoneModel()
    force_block: int = 50     # raw samples averaged into one recognizer input
    seed: int = 0
    fault: FaultInjection | None = None
    recognizer_enabled: bool = True

    def __post_init__(self):
        if self.feed_rate_mm_s <= 0:
            raise ValueError("feed_rate must be > 0")
        if self.tick_s > 0.0125:
            raise ValueError("tick must be <= 0.0125 s")
        if self.force_block < 1:
            raise ValueError("force_block must be >= 1")


def _layer_hardness(depth: np.ndarray, bone: BoneModel) -> tuple[np.ndarray, np.ndarray]:
    """Hardness per depth sample plus the cancellous mask."""
    cancellous = (depth >= bone.outer_cortical_mm) & (depth < bone.inner_start_mm)
    hardness = np.where(cancellous, bone.cancellous_hardness, bone.cortical_hardness)
    return hardness, cancellous


def force_plant(
    relative_feed_mm_s: float,
    depth_mm: float,
    bone: BoneModel,
    spindle_rpm: float,
    rng: np.random.Generator,
) -> float:
    """One thrust-force sample (N) at a cutting feed and hole depth.

    Zero beyond full breakthrough; otherwise hardness(layer) times the
    clamped nonnegative cutting feed, scaled by spindle speed and the
    entry engagement ramp, plus Gaussian noise (sensor floor everywhere
    inside bone, relative fluctuation added in the cancellous layer).
    """
    if depth_mm < 0:
        raise ValueError("depth must be >= 0")
    if depth_mm >= bone.total_thickness_mm:
        return 0.0
    depth = np.asarray([depth_mm])
    hardness, cancellous = _layer_hardness(depth, bone)
    feed = min(max(relative_feed_mm_s, 0.0), bone.feed_cap_mm_s(spindle_rpm))
    engagement = min(depth_mm / bone.engagement_depth_mm, 1.0)
    mean = float(hardness[0]) * feed * speed_factor(spindle_rpm) * engagement
    sigma = bone.noise_floor_n + (bone.cancellous_fluctuation * mean if cancellous[0] else 0.0)
    return mean + float(rng.normal(0.0, sigma))


@dataclass
class TrialTraces:
    t_s: np.ndarray
    force_n: np.ndarray
    bone_ap_mm: np.ndarray
    tool_mm: np.ndarray
    depth_mm: np.ndarray
    block_t_s: np.ndarray
    block_f_bar_n: np.ndarray
    block_a_star: np.ndarray
    block_phase: list[str]
    block_decision: list[str]


@dataclass
class TrialResult:
    """One simulated run.

    success requires the run to end without a monitor abort and the
    residual inner-cortical thickness to land in (0, 2] mm.  f_out /
    f_in are the peak block-mean forces recorded while cutting the
    outer / inner cortical layer (0.0 if the layer was never cut).
    """

    mode: Mode
    seed: int
    stop_depth_mm: float
    residual_mm: float
    success: bool
    f_out_n: float
    f_in_n: float
    stop_reason: str  # recognizer_stop | monitor_abort | breakthrough | horizon
    abort_reason: AbortReason | None
    stop_time_s: float
    traces: TrialTraces | None = None


def _breath_arrays(cfg: TrialConfig, t: np.ndarray, coeffs: FlowCoefficients,
                   phase_s: float) -> np.ndarray:
    if cfg.mode is Mode.STATIONARY:
        return np.zeros_like(t)
    tv = tidal_volume_series(t + phase_s, coeffs).values
    return cfg.displacement.q1_ap * tv + cfg.displacement.q0_ap


def run_trial(cfg: TrialConfig, keep_traces: bool = False) -> TrialResult:
    """Simulate one drilling run; deterministic for a given config."""
    rng = np.random.default_rng(cfg.seed)
    coeffs = solve_flow_coefficients(cfg.ventilator).coefficients
    # breath phase at trial start is arbitrary relative to the procedure
    phase_s = float(rng.uniform(0.0, cfg.ventilator.period_s))

    bone = cfg.bone
    amp = abs(cfg.displacement.q1_ap) * cfg.ventilator.tv_max_ml
    horizon_s = (bone.total_thickness_mm + amp + 1.0) / cfg.feed_rate_mm_s + cfg.ventilator.period_s
    n = int(math.ceil(horizon_s / cfg.tick_s))
    t = np.arange(n) * cfg.tick_s

    bone_pos = _breath_arrays(cfg, t, coeffs, phase_s)
    if cfg.mode is Mode.MOVING_COMPENSATED:
        segments = segment_displacement(t, bone_pos, SEGMENT_DURATION_S)
        comp = _track_positions(CompensationTrack(segments), t)
    else:
        comp = np.zeros_like(t)

    # drill tip registered on the bone surface at its start-of-trial pose
    tool = cfg.feed_rate_mm_s * t + comp + bone_pos[0]
    pen = tool - bone_pos
    depth = np.maximum.accumulate(np.maximum(pen, 0.0))
    cut_rate = np.diff(depth, prepend=0.0) / cfg.tick_s
    cut_rate = np.minimum(cut_rate, bone.feed_cap_mm_s(cfg.spindle_rpm))

    hardness, cancellous = _layer_hardness(depth, bone)
    engagement = np.minimum(depth / bone.engagement_depth_mm, 1.0)
    inside = depth < bone.total_thickness_mm
    mean_force = hardness * cut_rate * speed_factor(cfg.spindle_rpm) * engagement * inside
    sigma = (bone.noise_floor_n + bone.cancellous_fluctuation * mean_force * cancellous) * inside
    force = mean_force + sigma * rng.standard_normal(n)

    pos_err = np.zeros(n)
    if cfg.fault is not None:
        mask = t >= cfg.fault.time_s
        pos_err[mask] += cfg.fault.position_offset_mm
        force[mask] += cfg.fault.force_offset_n

    # safety monitor, sampled every tick
    tripped = (np.abs(pos_err) > cfg.monitor.h1_mm) | (np.abs(force) > cfg.monitor.h2_n)
    monitor_tick = int(np.argmax(tripped)) if tripped.any() else None
    abort_reason = None
    if monitor_tick is not None:
        if abs(pos_err[monitor_tick]) > cfg.monitor.h1_mm:
            abort_reason = AbortReason.POSITION_DEVIATION
        else:
            abort_reason = AbortReason.FORCE_LIMIT

    breakthrough = depth >= bone.total_thickness_mm
    breakthrough_tick = int(np.argmax(breakthrough)) if breakthrough.any() else None

    # recognizer consumes block-mean forces
    n_blocks = n // cfg.force_block
    block_force = force[: n_blocks * cfg.force_block].reshape(n_blocks, cfg.force_block).mean(axis=1)
    rec = Recognizer(cfg.recognizer)
    rec_stop_tick = None
    if cfg.recognizer_enabled:
        for b in range(n_blocks):
            if rec.push(float(block_force[b])) is Decision.STOP:
                rec_stop_tick = (b + 1) * cfg.force_block - 1
                break

    candidates = {"horizon": n - 1}
    if rec_stop_tick is not None:
        candidates["recognizer_stop"] = rec_stop_tick
    if breakthrough_tick is not None:
        candidates["breakthrough"] = breakthrough_tick
    if monitor_tick is not None:
        candidates["monitor_abort"] = monitor_tick
    # earliest event ends the trial; monitor wins ties (safety)
    order = {"monitor_abort": 0, "recognizer_stop": 1, "breakthrough": 2, "horizon": 3}
    stop_reason, end_tick = min(candidates.items(), key=lambda kv: (kv[1], order[kv[0]]))
    if stop_reason != "monitor_abort":
        abort_reason = None

    stop_depth = float(depth[end_tick])
    residual = bone.total_thickness_mm - stop_depth
    success = abort_reason is None and 0.0 < residual <= 2.0

    done_blocks = (end_tick + 1) // cfg.force_block
    block_depth = depth[np.arange(1, n_blocks + 1) * cfg.force_block - 1]
    f_out = _layer_peak(block_force, block_depth, done_blocks, 0.0, bone.outer_cortical_mm)
    f_in = _layer_peak(block_force, block_depth, done_blocks, bone.inner_start_mm, bone.total_thickness_mm)

    traces = None
    if keep_traces:
        sl = slice(0, end_tick + 1)
        nb = min(done_blocks, len(rec.log))
        traces = TrialTraces(
            t_s=t[sl].copy(),
            force_n=force[sl].copy(),
            bone_ap_mm=bone_pos[sl].copy(),
            tool_mm=tool[sl].copy(),
            depth_mm=depth[sl].copy(),
            block_t_s=(np.arange(1, nb + 1) * cfg.force_block - 1) * cfg.tick_s,
            block_f_bar_n=np.array([r.f_bar for r in rec.log[:nb]]),
            block_a_star=np.array([r.a_star for r in rec.log[:nb]]),
            block_phase=[r.phase.value for r in rec.log[:nb]],
            block_decision=[r.decision.value for r in rec.log[:nb]],
        )

    return TrialResult(
        mode=cfg.mode,
        seed=cfg.seed,
        stop_depth_mm=stop_depth,
        residual_mm=residual,
        success=success,
        f_out_n=f_out,
        f_in_n=f_in,
        stop_reason=stop_reason,
        abort_reason=abort_reason,
        stop_time_s=float(t[end_tick]),
        traces=traces,
    )


def _layer_peak(block_force, block_depth, done_blocks, lo, hi) -> float:
    mask = (block_depth[:done_blocks] >= lo) & (block_depth[:done_blocks] < hi)
    if not mask.any():
        return 0.0
    return float(block_force[:done_blocks][mask].max())


def _track_positions(track: CompensationTrack, t: np.ndarray) -> np.ndarray:
    """Vectorized CompensationTrack.position over a time grid."""
    segs = track.segments
    starts = np.array([s.t_start for s in segs])
    dur = np.array([s.duration for s in segs])
    v = np.array([s.peak_velocity for s in segs])
    a = np.array([s.acceleration for s in segs])
    dist = np.array([s.distance for s in segs])
    tr = np.divide(v, a, out=np.zeros_like(v), where=a != 0.0)
    cum = np.concatenate([[0.0], np.cumsum(dist)])[:-1]

    idx = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(segs) - 1)
    tl = np.clip(t - starts[idx], 0.0, dur[idx])
    vi, ai, tri, di = v[idx], a[idx], tr[idx], dist[idx]
    ramp1 = 0.5 * ai * tl**2
    cruise = 0.5 * vi * tri + vi * (tl - tri)
    ramp2 = di - 0.5 * ai * (dur[idx] - tl) ** 2
    local = np.where(tl < tri, ramp1, np.where(tl <= dur[idx] - tri, cruise, ramp2))
    local = np.where(vi == 0.0, 0.0, local)
    out = cum[idx] + local
    return np.where(t < starts[0], 0.0, out)


@dataclass
class BatchSummary:
    """Aggregates over n independent trials (seeds seed+0 .. seed+n-1)."""

    mode: Mode
    n: int
    base_seed: int
    success_rate: float
    median_f_out: float
    median_f_in: float
    results: list[TrialResult]

    @property
    def residuals(self) -> np.ndarray:
        return np.array([r.residual_mm for r in self.results])

    @property
    def f_out(self) -> np.ndarray:
        return np.array([r.f_out_n for r in self.results])

    @property
    def f_in(self) -> np.ndarray:
        return np.array([r.f_in_n for r in self.results])


def run_batch(n: int, cfg: TrialConfig, keep_traces: bool = False) -> BatchSummary:
    """Run n trials with consecutive seeds and aggregate deterministically."""
    if n < 1:
        raise ValueError("n must be >= 1")
    results = [
        run_trial(replace(cfg, seed=cfg.seed + i), keep_traces=keep_traces)
        for i in range(n)
    ]
    f_out = np.array([r.f_out_n for r in results])
    f_in = np.array([r.f_in_n for r in results])
    return BatchSummary(
        mode=cfg.mode,
        n=n,
        base_seed=cfg.seed,
        success_rate=float(np.mean([r.success for r in results])),
        median_f_out=float(np.median(f_out)),
        median_f_in=float(np.median(f_in)),
        results=results,
    )
