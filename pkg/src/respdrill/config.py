"""Plain-text configuration: sections of key = value lines.

Sections: [ventilator], [spine], [recognizer], [monitor], [plant],
[pso], [signal].  Every section and key is optional (defaults apply),
but unknown sections or keys are errors so typos cannot silently fall
back to defaults.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields
from pathlib import Path

from .compensation import MonitorConfig
from .fitting import PsoConfig
from .motion import SpineGeometry
from .recognition import RecognizerConfig
from .respiration import VentilatorConfig
from .simulator import BoneModel


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SignalOptions:
    """De-noising options: candidate bases, metric weights, probe width."""

    candidates: tuple[str, ...] = ("db5", "coif4", "coif5", "bior2.8")
    weight_nsr: float = 1.0 / 3.0
    weight_w_max: float = 1.0 / 3.0
    weight_w_mean: float = 1.0 / 3.0
    delta_tv_fraction: float = 0.02
    levels: int = 6

    @property
    def weights(self) -> tuple[float, float, float]:
        return (self.weight_nsr, self.weight_w_max, self.weight_w_mean)


@dataclass(frozen=True)
class PlantOptions:
    """Simulator settings that are not part of the bone model itself."""

    feed_rate_mm_s: float = 0.5
    tick_s: float = 0.0025
    force_block: int = 50


@dataclass(frozen=True)
class AppConfig:
    ventilator: VentilatorConfig = VentilatorConfig()
    spine: SpineGeometry = SpineGeometry()
    recognizer: RecognizerConfig = RecognizerConfig()
    monitor: MonitorConfig = MonitorConfig()
    bone: BoneModel = BoneModel()
    pso: PsoConfig = PsoConfig()
    signal: SignalOptions = SignalOptions()
    plant: PlantOptions = PlantOptions()


_VENTILATOR_KEYS = {
    "tv_max_ml": float,
    "resp_freq_per_min": float,
    "ratio_in": float,
    "ratio_out": float,
    "exhale_peak_factor": float,
}
_SPINE_KEYS = {f.name: float for f in fields(SpineGeometry)}
_RECOGNIZER_KEYS = {
    "window": int,
    "gain": float,
    "gain_threshold": float,
    "c1": float,
    "c2": float,
    "c3": float,
    "drop_ratio": float,
    "min_calibration_force": float,
    "confirmation_count": int,
    "calibration_budget": int,
}
_MONITOR_KEYS = {"h1_mm": float, "h2_n": float}
_BONE_KEYS = {f.name: float for f in fields(BoneModel)}
_PLANT_ONLY_KEYS = {"feed_rate_mm_s": float, "tick_s": float, "force_block": int}
_PSO_KEYS = {
    "population": int,
    "max_iterations": int,
    "inertia": float,
    "cognitive": float,
    "social": float,
}
_SIGNAL_KEYS = {
    "candidates": str,
    "weight_nsr": float,
    "weight_w_max": float,
    "weight_w_mean": float,
    "delta_tv_fraction": float,
    "levels": int,
}

_SECTION_KEYS = {
    "ventilator": _VENTILATOR_KEYS,
    "spine": _SPINE_KEYS,
    "recognizer": _RECOGNIZER_KEYS,
    "monitor": _MONITOR_KEYS,
    "plant": {**_BONE_KEYS, **_PLANT_ONLY_KEYS},
    "pso": _PSO_KEYS,
    "signal": _SIGNAL_KEYS,
}


def _section_values(parser: configparser.ConfigParser, section: str) -> dict:
    if not parser.has_section(section):
        return {}
    allowed = _SECTION_KEYS[section]
    values = {}
    for key, raw in parser.items(section):
        if key not in allowed:
            raise ConfigError(
                f"unknown key '{key}' in section [{section}]; allowed: {sorted(allowed)}"
            )
        try:
            values[key] = allowed[key](raw)
        except ValueError:
            raise ConfigError(
                f"key '{key}' in [{section}]: cannot parse {raw!r} as {allowed[key].__name__}"
            ) from None
    return values


def load_config(path: Path | None) -> AppConfig:
    """Parse a config file into the typed bundle; None gives all defaults."""
    if path is None:
        return AppConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    unknown = set(parser.sections()) - set(_SECTION_KEYS)
    if unknown:
        raise ConfigError(
            f"unknown section(s) {sorted(unknown)}; allowed: {sorted(_SECTION_KEYS)}"
        )

    vent = _section_values(parser, "ventilator")
    signal_raw = _section_values(parser, "signal")
    if "candidates" in signal_raw:
        signal_raw["candidates"] = tuple(
            name.strip() for name in signal_raw["candidates"].split(",") if name.strip()
        )
    plant_raw = _section_values(parser, "plant")
    bone_raw = {k: v for k, v in plant_raw.items() if k in _BONE_KEYS}
    plant_only = {k: v for k, v in plant_raw.items() if k in _PLANT_ONLY_KEYS}
    if "force_block" in plant_only:
        plant_only["force_block"] = int(plant_only["force_block"])

    try:
        return AppConfig(
            ventilator=VentilatorConfig(**vent),
            spine=SpineGeometry(**_section_values(parser, "spine")),
            recognizer=RecognizerConfig(**_section_values(parser, "recognizer")),
            monitor=MonitorConfig(**_section_values(parser, "monitor")),
            bone=BoneModel(**bone_raw),
            pso=PsoConfig(**_section_values(parser, "pso")),
            signal=SignalOptions(**signal_raw),
            plant=PlantOptions(**plant_only),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
