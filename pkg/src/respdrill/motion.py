"""Tidal-volume-to-displacement model of a vertebra segment.

A vertebra (rigid) between two intervertebral discs, loaded by the
pressure change that breathing induces in the chest: a uniform load
bends the discs (AP deflection) and an axial load stretches them
(SI elongation).  Both reduce to linear maps from tidal volume to
displacement; LR has no physical derivation and stays empirical
(fitted from data, zero by default).

Internal arithmetic uses N and mm; pressures enter in Pa and are
converted once, in pa_to_n_per_mm2.
"""

from __future__ import annotations

from dataclasses import dataclass


def pa_to_n_per_mm2(pressure_pa: float) -> float:
    """Single point of unit conversion: Pa (N/m^2) to N/mm^2."""
    return pressure_pa * 1e-6


@dataclass(frozen=True)
class SpineGeometry:
    """Geometry and material constants of the modeled segment.

    Lengths in mm, areas mm^2, inertia mm^4, modulus Pa, volumes ml.
    centrum_length and disc_length default to CT-measured means
    (upper/lower disc lengths averaged); the chest dimensions
    (chest_volume, chest_width, chest_slice_area) and the equivalent
    disc section values (disc_inertia, disc_area) are not published and
    carry documented desk-scale defaults.
    """

    centrum_length_mm: float = 23.10
    disc_length_mm: float = 5.49
    disc_modulus_pa: float = 75.8e3
    disc_inertia_mm4: float = 2800.0
    disc_area_mm2: float = 900.0
    disc_total_length_mm: float = 10.98
    chest_volume_ml: float = 5000.0
    atmospheric_pressure_pa: float = 101325.0
    chest_width_mm: float = 100.0
    chest_slice_area_mm2: float = 600.0

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0:
                raise ValueError(f"{name} must be > 0, got {value}")

    @property
    def flexural_rigidity(self) -> float:
        """E*I in N*mm^2."""
        return pa_to_n_per_mm2(self.disc_modulus_pa) * self.disc_inertia_mm4


@dataclass(frozen=True)
class DisplacementModel:
    """Per-axis linear coefficients: d = q1 * Tv + q0 (mm, ml)."""

    q1_ap: float
    q0_ap: float = 0.0
    q1_si: float = 0.0
    q0_si: float = 0.0
    q1_lr: float = 0.0
    q0_lr: float = 0.0


@dataclass(frozen=True)
class DisplacementSample:
    t_s: float
    d_ap_mm: float
    d_si_mm: float
    d_lr_mm: float


def uniform_load(tv_ml: float, geom: SpineGeometry) -> float:
    """Uniform load intensity q (N/mm) produced by a tidal volume.

    Ideal-gas pressure change scaled by the chest width:
    q = (Tv / V0) * p0 * b_w.
    """
    pressure = pa_to_n_per_mm2(geom.atmospheric_pressure_pa)
    return (tv_ml / geom.chest_volume_ml) * pressure * geom.chest_width_mm


def deflection_profile(x_mm: float, q_n_per_mm: float, geom: SpineGeometry) -> tuple[float, float]:
    """Disc deflection v (mm) and slope theta (rad) at position x along the disc.

    Solves the beam deflection equation
        v'' = (q x^2 - 2 R_s x) / (2 E I),   R_s = q (l + 2m) / 2
    with integration constants c1 = q m^3/(3EI) + q l m^2/(4EI), c2 = 0.
    Valid for 0 <= x <= disc length.
    """
    m = geom.disc_length_mm
    if not 0.0 <= x_mm <= m:
        raise ValueError(f"x must lie in [0, {m}] mm, got {x_mm}")
    l = geom.centrum_length_mm
    ei = geom.flexural_rigidity
    q = q_n_per_mm
    c1 = q * m**3 / (3.0 * ei) + q * l * m**2 / (4.0 * ei)
    theta = q * x_mm**3 / (6.0 * ei) - q * (l + 2.0 * m) * x_mm**2 / (4.0 * ei) + c1
    v = q * x_mm**4 / (24.0 * ei) - q * (l + 2.0 * m) * x_mm**3 / (12.0 * ei) + c1 * x_mm
    return v, theta


def physical_coefficients(geom: SpineGeometry) -> DisplacementModel:
    """Displacement coefficients derived from geometry.

    AP slope is the end-of-disc deflection per unit tidal volume
    (closed form); SI slope is the axial elongation per unit tidal
    volume.  Intercepts are left at zero: physically the rest state,
    and in practice free parameters absorbed by the data fit.  LR is
    zeroed (symmetric chest).
    """
    m = geom.disc_length_mm
    l = geom.centrum_length_mm
    ei = geom.flexural_rigidity
    p0 = pa_to_n_per_mm2(geom.atmospheric_pressure_pa)
    q1_ap = (5.0 * m**4 / (24.0 * ei) + l * m**3 / (6.0 * ei)) * (
        p0 * geom.chest_width_mm / geom.chest_volume_ml
    )
    q1_si = (
        2.0
        * p0
        * geom.chest_slice_area_mm2
        * geom.disc_total_length_mm
        / (
            pa_to_n_per_mm2(geom.disc_modulus_pa)
            * geom.disc_area_mm2
            * geom.chest_volume_ml
        )
    )
    return DisplacementModel(q1_ap=q1_ap, q1_si=q1_si)


def predict_displacement(tv_ml: float, model: DisplacementModel, t_s: float = 0.0) -> DisplacementSample:
    """Per-axis displacement at a tidal volume; affine in tv."""
    return DisplacementSample(
        t_s=t_s,
        d_ap_mm=model.q1_ap * tv_ml + model.q0_ap,
        d_si_mm=model.q1_si * tv_ml + model.q0_si,
        d_lr_mm=model.q1_lr * tv_ml + model.q0_lr,
    )
