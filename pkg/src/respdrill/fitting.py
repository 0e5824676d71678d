"""Displacement model identification from (tidal volume, displacement) pairs.

A particle swarm search maximizes the coefficient of determination of
the linear model d = q1 * tv + q0; an exact ordinary-least-squares fit
serves as the independent oracle the swarm is validated against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class PsoConfig:
    """Swarm settings.  Inertia/cognitive/social default to the standard
    constriction values; bounds default to a data-scaled box around the
    least-squares solution."""

    population: int = 24
    max_iterations: int = 2000
    inertia: float = 0.729
    cognitive: float = 1.494
    social: float = 1.494
    search_bounds: tuple[tuple[float, float], tuple[float, float]] | None = None
    seed: int = 0
    stall_iterations: int = 200
    stall_tolerance: float = 1e-12

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if self.search_bounds is not None:
            for lo, hi in self.search_bounds:
                if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
                    raise ValueError("search bounds must be finite, non-degenerate intervals")


@dataclass(frozen=True)
class FitResult:
    params: tuple[float, float]  # (q1, q0)
    r2: float
    iterations_used: int


def r_squared(params: tuple[float, float], tv: np.ndarray, disp: np.ndarray) -> float:
    """Coefficient of determination of the line q1*tv + q0 on the data.

    R^2 = 1 - sum((g - g_hat)^2) / sum((g - g_mean)^2).
    """
    tv = np.asarray(tv, dtype=float)
    disp = np.asarray(disp, dtype=float)
    if len(tv) < 2 or len(tv) != len(disp):
        raise ValueError("need >= 2 paired samples")
    ss_tot = float(np.sum((disp - disp.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("displacement variance is zero; R^2 undefined")
    q1, q0 = params
    residual = disp - (q1 * tv + q0)
    return 1.0 - float(np.sum(residual**2)) / ss_tot


def fit_ols(tv: np.ndarray, disp: np.ndarray) -> tuple[float, float]:
    """Exact least-squares line (q1, q0); maximizes R^2 over all lines."""
    tv = np.asarray(tv, dtype=float)
    disp = np.asarray(disp, dtype=float)
    if len(tv) < 2 or len(tv) != len(disp):
        raise ValueError("need >= 2 paired samples")
    var = float(np.sum((tv - tv.mean()) ** 2))
    if var == 0.0:
        raise ValueError("tidal volume variance is zero; design is singular")
    cov = float(np.sum((tv - tv.mean()) * (disp - disp.mean())))
    q1 = cov / var
    q0 = float(disp.mean() - q1 * tv.mean())
    return q1, q0


def _default_bounds(tv, disp):
    try:
        q1_ols, _ = fit_ols(tv, disp)
    except ValueError:
        q1_ols = 0.0
    q1_span = 10.0 * abs(q1_ols) if abs(q1_ols) > 0 else 1.0
    return ((-q1_span, q1_span), (-20.0, 20.0))


def fit_pso(tv: np.ndarray, disp: np.ndarray, cfg: PsoConfig = PsoConfig()) -> FitResult:
    """Particle swarm fit of (q1, q0) with R^2 fitness.

    Deterministic for a fixed seed.  Positions are clamped to the search
    bounds after every update; the run stops early once the global best
    has not improved by more than stall_tolerance for stall_iterations
    consecutive iterations.
    """
    tv = np.asarray(tv, dtype=float)
    disp = np.asarray(disp, dtype=float)
    ss_tot = float(np.sum((disp - disp.mean()) ** 2))
    if len(tv) < 2 or ss_tot == 0.0:
        raise ValueError("data unsuitable for fitting (too short or zero variance)")
    bounds = cfg.search_bounds or _default_bounds(tv, disp)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])

    rng = np.random.default_rng(cfg.seed)
    pos = rng.uniform(lo, hi, size=(cfg.population, 2))
    vel = np.zeros_like(pos)

    def fitness(p):
        # vectorized R^2 across the swarm
        pred = p[:, 0:1] * tv[None, :] + p[:, 1:2]
        sse = np.sum((disp[None, :] - pred) ** 2, axis=1)
        return 1.0 - sse / ss_tot

    fit = fitness(pos)
    pbest = pos.copy()
    pbest_fit = fit.copy()
    g_idx = int(np.argmax(fit))
    gbest = pos[g_idx].copy()
    gbest_fit = float(fit[g_idx])

    stall = 0
    iterations = 0
    for iterations in range(1, cfg.max_iterations + 1):
        r1 = rng.random((cfg.population, 2))
        r2 = rng.random((cfg.population, 2))
        vel = (
            cfg.inertia * vel
            + cfg.cognitive * r1 * (pbest - pos)
            + cfg.social * r2 * (gbest[None, :] - pos)
        )
        pos = np.clip(pos + vel, lo, hi)
        fit = fitness(pos)

        improved = fit > pbest_fit
        pbest[improved] = pos[improved]
        pbest_fit[improved] = fit[improved]
        g_idx = int(np.argmax(pbest_fit))
        if pbest_fit[g_idx] > gbest_fit + cfg.stall_tolerance:
            stall = 0
        else:
            stall += 1
        if pbest_fit[g_idx] > gbest_fit:
            gbest_fit = float(pbest_fit[g_idx])
            gbest = pbest[g_idx].copy()
        if stall >= cfg.stall_iterations:
            break

    return FitResult(params=(float(gbest[0]), float(gbest[1])), r2=gbest_fit, iterations_used=iterations)


@dataclass(frozen=True)
class AxisFits:
    """Three independent per-axis fits, in (ap, si, lr) order."""

    ap: FitResult
    si: FitResult
    lr: FitResult

    results: tuple[FitResult, FitResult, FitResult] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "results", (self.ap, self.si, self.lr))


def fit_axes(tv: np.ndarray, displacement_by_axis: dict[str, np.ndarray], cfg: PsoConfig) -> AxisFits:
    """Fit each displacement axis independently (three 2-parameter swarms)."""
    fits = {}
    for i, axis in enumerate(("ap", "si", "lr")):
        axis_cfg = PsoConfig(
            population=cfg.population,
            max_iterations=cfg.max_iterations,
            inertia=cfg.inertia,
            cognitive=cfg.cognitive,
            social=cfg.social,
            search_bounds=cfg.search_bounds,
            seed=cfg.seed + i,
            stall_iterations=cfg.stall_iterations,
            stall_tolerance=cfg.stall_tolerance,
        )
        fits[axis] = fit_pso(tv, displacement_by_axis[axis], axis_cfg)
    return AxisFits(**fits)
