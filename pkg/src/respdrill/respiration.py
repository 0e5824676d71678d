"""Ventilator flow waveform and real-time tidal volume.

Volume-control ventilation with a square inhale and an exponentially
decaying exhale.  The inhale flow ``a`` follows directly from the tidal
volume and the inhale duration; the exhale decay base ``b`` and offset
``c`` are obtained by a damped Newton solve of the two remaining
waveform constraints (exhale flow decaying to zero, zero net volume per
breath).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

# Reference coefficient set reported for the standard 500 ml / 12 bpm / 1:2
# setting; kept for comparison in the solver report, never asserted.
REFERENCE_B = 0.4602
REFERENCE_C = 0.0753


class WaveformKind(Enum):
    """Ventilator flow waveform shapes.

    Only SQUARE_EXPONENTIAL (square inhale, exponential-decay exhale) has
    a coefficient solver; the other shapes are enumerated for config
    round-tripping but unsupported.
    """

    SQUARE_EXPONENTIAL = "square_exponential"
    ASCENDING_RAMP = "ascending_ramp"
    DESCENDING_RAMP = "descending_ramp"
    SINE = "sine"
    EXPONENTIAL_RISE = "exponential_rise"


class SolverError(RuntimeError):
    """Raised when the coefficient solve does not reach tolerance."""

    def __init__(self, message: str, residuals: tuple[float, float]):
        super().__init__(message)
        self.residuals = residuals


@dataclass(frozen=True)
class VentilatorConfig:
    """Ventilator settings under volume control.

    tv_max_ml: ideal maximum tidal volume per breath.
    resp_freq_per_min: breaths per minute; period is 60 / resp_freq.
    ratio_in, ratio_out: inhale:exhale duration ratio parts.
    exhale_peak_factor: ratio of peak exhale speed to the constant
        inhale speed (about 1.5 for the standard setting).
    """

    tv_max_ml: float = 500.0
    resp_freq_per_min: float = 12.0
    ratio_in: float = 1.0
    ratio_out: float = 2.0
    exhale_peak_factor: float = 1.5
    waveform: WaveformKind = WaveformKind.SQUARE_EXPONENTIAL

    def __post_init__(self):
        if self.tv_max_ml <= 0:
            raise ValueError("tv_max_ml must be > 0")
        if self.resp_freq_per_min <= 0:
            raise ValueError("resp_freq_per_min must be > 0")
        if self.ratio_in <= 0 or self.ratio_out <= 0:
            raise ValueError("ratio parts must be > 0")
        if self.exhale_peak_factor <= 1.0:
            raise ValueError("exhale_peak_factor must be > 1")

    @property
    def period_s(self) -> float:
        return 60.0 / self.resp_freq_per_min

    @property
    def t_inhale_s(self) -> float:
        return self.period_s * self.ratio_in / (self.ratio_in + self.ratio_out)


@dataclass(frozen=True)
class FlowCoefficients:
    """Solved constants of the flow waveform.

    a: inhale flow (ml/s); b: exhale decay base per second, 0 < b < 1;
    c: exhale flow offset (ml/s).
    """

    a: float
    b: float
    c: float
    t_inhale: float
    period: float
    exhale_peak_factor: float = 1.5

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("a must be > 0")
        if not 0.0 < self.b < 1.0:
            raise ValueError("b must lie in (0, 1)")
        if not self.t_inhale < self.period:
            raise ValueError("t_inhale must be shorter than the period")


@dataclass(frozen=True)
class SolverReport:
    """Diagnostics from solve_flow_coefficients.

    residual_asymptote: terminal exhale flow offset (the branch must
        continue toward zero flow).
    residual_volume: net volume over one full period (ml).
    boundary_flow_ml_s: strict end-of-period exhale flow.  For this
        waveform family it cannot reach zero together with volume
        conservation (max expellable volume on that manifold is below
        tv_max); it is reported as a diagnostic instead of solved for.
    reference_delta_b / reference_delta_c: relative/absolute difference
        from the published reference coefficients for the standard
        setting.
    """

    coefficients: FlowCoefficients
    residual_asymptote: float
    residual_volume: float
    boundary_flow_ml_s: float
    iterations: int
    reference_delta_b: float
    reference_delta_c: float


@dataclass(frozen=True)
class TidalVolumeSeries:
    """Sampled tidal volume trace (ml, nonnegative)."""

    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.timestamps) != len(self.values):
            raise ValueError("timestamps and values must have equal length")


def _exhale_volume(b: float, c: float, peak_flow: float, t_ex: float) -> float:
    # integral of (-peak_flow * b**u + c) over u in [0, t_ex]
    return -peak_flow * (b**t_ex - 1.0) / math.log(b) + c * t_ex


def _residuals(b: float, c: float, cfg: VentilatorConfig) -> tuple[float, float]:
    peak = cfg.exhale_peak_factor * (cfg.tv_max_ml / cfg.t_inhale_s)
    t_ex = cfg.period_s - cfg.t_inhale_s
    r_asym = c
    r_vol = cfg.tv_max_ml + _exhale_volume(b, c, peak, t_ex)
    return r_asym, r_vol


def solve_flow_coefficients(
    cfg: VentilatorConfig, tol: float = 1e-10, max_iter: int = 200
) -> SolverReport:
    """Solve the exhale coefficients (b, c) for a ventilator setting.

    ``a`` is fixed exactly by the square inhale integral
    (a * t_inhale = tv_max).  The two remaining constraints are solved
    by a damped Newton iteration from (b, c) = (0.5, 0.0):

      1. the exhale flow continues toward zero (terminal offset c = 0);
      2. zero net volume over one full period.

    Raises SolverError if both residuals do not fall below ``tol``
    within ``max_iter`` iterations.
    """
    if cfg.waveform is not WaveformKind.SQUARE_EXPONENTIAL:
        raise SolverError(
            f"no coefficient solver for waveform {cfg.waveform.value}", (math.nan, math.nan)
        )
    a = cfg.tv_max_ml / cfg.t_inhale_s
    t_ex = cfg.period_s - cfg.t_inhale_s
    peak = cfg.exhale_peak_factor * a

    b, c = 0.5, 0.0
    iterations = 0
    for iterations in range(1, max_iter + 1):
        r1, r2 = _residuals(b, c, cfg)
        if abs(r1) < tol and abs(r2) < tol:
            break
        # Jacobian of (r1, r2) wrt (b, c)
        ln_b = math.log(b)
        db = -peak * (t_ex * b ** (t_ex - 1.0) * ln_b - (b**t_ex - 1.0) / b) / (ln_b**2)
        J = np.array([[0.0, 1.0], [db, t_ex]])
        step = np.linalg.solve(J, -np.array([r1, r2]))
        # damped update keeping b inside (0, 1)
        lam = 1.0
        norm0 = math.hypot(r1, r2)
        while lam > 1e-12:
            bn, cn = b + lam * step[0], c + lam * step[1]
            if 0.0 < bn < 1.0:
                rn = _residuals(bn, cn, cfg)
                if math.hypot(*rn) < norm0:
                    b, c = bn, cn
                    break
            lam *= 0.5
        else:
            break
    else:
        r = _residuals(b, c, cfg)
        raise SolverError(
            f"flow coefficient solve did not converge in {max_iter} iterations", r
        )

    r1, r2 = _residuals(b, c, cfg)
    if abs(r1) >= tol or abs(r2) >= tol:
        raise SolverError("flow coefficient solve stalled above tolerance", (r1, r2))

    coeffs = FlowCoefficients(
        a=a,
        b=b,
        c=c,
        t_inhale=cfg.t_inhale_s,
        period=cfg.period_s,
        exhale_peak_factor=cfg.exhale_peak_factor,
    )
    return SolverReport(
        coefficients=coeffs,
        residual_asymptote=r1,
        residual_volume=r2,
        boundary_flow_ml_s=-peak * b**t_ex + c,
        iterations=iterations,
        reference_delta_b=(b - REFERENCE_B) / REFERENCE_B,
        reference_delta_c=c - REFERENCE_C,
    )


def flow_velocity(t: float, coeffs: FlowCoefficients) -> float:
    """Instantaneous ventilator flow (ml/s) at time t >= 0.

    Positive during inhale, negative during exhale; periodic with the
    breath period.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    tau = math.fmod(t, coeffs.period)
    if tau < coeffs.t_inhale:
        return coeffs.a
    u = tau - coeffs.t_inhale
    return -(coeffs.exhale_peak_factor * coeffs.a) * coeffs.b**u + coeffs.c


def tidal_volume(t: float, coeffs: FlowCoefficients) -> float:
    """Tidal volume Tv(t) in ml: closed-form integral of the flow, clamped >= 0."""
    if t < 0:
        raise ValueError("t must be >= 0")
    tau = math.fmod(t, coeffs.period)
    if tau <= coeffs.t_inhale:
        return coeffs.a * tau
    u = tau - coeffs.t_inhale
    peak = coeffs.exhale_peak_factor * coeffs.a
    tv_max = coeffs.a * coeffs.t_inhale
    val = tv_max + _exhale_volume(coeffs.b, coeffs.c, peak, u)
    return max(val, 0.0)


def tidal_volume_series(timestamps: np.ndarray, coeffs: FlowCoefficients) -> TidalVolumeSeries:
    """Evaluate Tv on a sample grid (vectorized closed form)."""
    ts = np.asarray(timestamps, dtype=float)
    tau = np.fmod(ts, coeffs.period)
    u = np.maximum(tau - coeffs.t_inhale, 0.0)
    peak = coeffs.exhale_peak_factor * coeffs.a
    tv_max = coeffs.a * coeffs.t_inhale
    inhale = coeffs.a * tau
    exhale = tv_max - peak * (coeffs.b**u - 1.0) / math.log(coeffs.b) + coeffs.c * u
    values = np.maximum(np.where(tau <= coeffs.t_inhale, inhale, exhale), 0.0)
    return TidalVolumeSeries(timestamps=ts, values=values)
