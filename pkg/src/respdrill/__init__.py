"""Respiration-compensated pedicle drilling at desk scale.

Model the ventilator-driven tidal volume, map it to vertebra
displacement, identify the model from recordings (wavelet de-noising +
particle swarm fitting), compensate the motion with short trapezoidal
segments, recognize drilling state from thrust force, and run the
closed-loop trial simulator that ties it together.
"""

from .compensation import (
    AbortReason,
    MonitorConfig,
    MonitorVerdict,
    MotionSegment,
    monitor,
    segment_displacement,
    trapezoid_profile,
)
from .fitting import FitResult, PsoConfig, fit_ols, fit_pso, r_squared
from .motion import (
    DisplacementModel,
    DisplacementSample,
    SpineGeometry,
    deflection_profile,
    physical_coefficients,
    predict_displacement,
    uniform_load,
)
from .recognition import (
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
from .respiration import (
    FlowCoefficients,
    SolverError,
    SolverReport,
    TidalVolumeSeries,
    VentilatorConfig,
    flow_velocity,
    solve_flow_coefficients,
    tidal_volume,
    tidal_volume_series,
)
from .simulator import (
    BatchSummary,
    BoneModel,
    FaultInjection,
    Mode,
    TrialConfig,
    TrialResult,
    force_plant,
    run_batch,
    run_trial,
)
from .wavelets import (
    BASES,
    DenoiseMetrics,
    DwtDecomposition,
    WaveletBasis,
    band_reconstruct,
    denoise,
    denoise_metrics,
    dwt_decompose,
    select_basis,
)

__version__ = "0.1.0"
