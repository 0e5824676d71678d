"""CSV schemas, recording ingestion, synthetic recordings, run manifests.

File formats (all CSV: header row, comma separator, '.' decimal, UTF-8,
floats written with shortest round-trip repr so read-back is lossless):

  displacement recording: t_s, d_ap_mm, d_si_mm, d_lr_mm   (8 Hz)
  tidal volume recording: t_s, tv_ml                       (64 Hz)
  trial trace:            t_s, force_n, bone_ap_mm, tool_mm, depth_mm
  trial decisions:        index, t_s, f_bar_n, a_star, phase, decision
  batch summary:          index, seed, mode, spindle_rpm, success,
                          stop_depth_mm, residual_mm, f_out_n, f_in_n,
                          stop_reason, abort_reason

Every command writes a manifest.json listing its outputs with sha256
checksums; a rerun with the same config and seed reproduces the files
byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .motion import DisplacementModel
from .respiration import VentilatorConfig, solve_flow_coefficients, tidal_volume_series

DISPLACEMENT_COLUMNS = ["t_s", "d_ap_mm", "d_si_mm", "d_lr_mm"]
TV_COLUMNS = ["t_s", "tv_ml"]

DISPLACEMENT_RATE_HZ = 8.0
TV_RATE_HZ = 64.0


class IngestError(ValueError):
    pass


def write_csv(path: Path, columns: list[str], rows) -> None:
    """Write rows of floats/strings; floats use repr for lossless round-trip."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def read_table(path: Path, expected_columns: list[str]) -> dict[str, np.ndarray]:
    """Read a schema-checked numeric CSV into column arrays.

    Raises IngestError with the offending line number on parse problems,
    on missing/unexpected columns and on non-monotonic timestamps.
    """
    path = Path(path)
    if not path.exists():
        raise IngestError(f"{path}: file not found")
    with path.open("r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        if header != expected_columns:
            raise IngestError(
                f"{path}: header {header} does not match expected {expected_columns}"
            )
        data: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected_columns):
                raise IngestError(f"{path}:{lineno}: expected {len(expected_columns)} fields, got {len(row)}")
            try:
                data.append([float(v) for v in row])
            except ValueError as exc:
                raise IngestError(f"{path}:{lineno}: {exc}") from None
    if not data:
        raise IngestError(f"{path}: no data rows")
    arr = np.asarray(data)
    cols = {name: arr[:, i] for i, name in enumerate(expected_columns)}
    t = cols[expected_columns[0]]
    if not np.all(np.diff(t) > 0):
        bad = int(np.argmin(np.diff(t) > 0)) + 2
        raise IngestError(f"{path}: timestamps not strictly increasing near line {bad}")
    if not np.all(np.isfinite(arr)):
        raise IngestError(f"{path}: non-finite values present")
    return cols


@dataclass
class AlignedRecording:
    """Displacement samples paired with interpolated tidal volume."""

    t_s: np.ndarray
    tv_ml: np.ndarray
    d_ap_mm: np.ndarray
    d_si_mm: np.ndarray
    d_lr_mm: np.ndarray

    @property
    def row_count(self) -> int:
        return len(self.t_s)


def ingest(displacement_csv: Path, tv_csv: Path) -> AlignedRecording:
    """Pair the two recordings on the displacement time grid.

    Tidal volume is linearly interpolated onto the displacement
    timestamps; displacement rows outside the tv time range are dropped.
    """
    disp = read_table(displacement_csv, DISPLACEMENT_COLUMNS)
    tv = read_table(tv_csv, TV_COLUMNS)
    t_d = disp["t_s"]
    lo, hi = tv["t_s"][0], tv["t_s"][-1]
    keep = (t_d >= lo) & (t_d <= hi)
    if not keep.any():
        raise IngestError(
            f"time ranges do not overlap: displacement [{t_d[0]}, {t_d[-1]}] vs tv [{lo}, {hi}]"
        )
    t = t_d[keep]
    return AlignedRecording(
        t_s=t,
        tv_ml=np.interp(t, tv["t_s"], tv["tv_ml"]),
        d_ap_mm=disp["d_ap_mm"][keep],
        d_si_mm=disp["d_si_mm"][keep],
        d_lr_mm=disp["d_lr_mm"][keep],
    )


@dataclass(frozen=True)
class RecordingSpec:
    """Synthetic recording settings: per-axis displacement amplitudes at
    full tidal volume, additive Gaussian noise, duration and seed."""

    amplitude_ap_mm: float = 4.0
    amplitude_si_mm: float = 2.0
    amplitude_lr_mm: float = 1.0
    noise_std_mm: float = 0.1
    duration_s: float = 30.0
    seed: int = 0

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("duration must be > 0")


def synthetic_model(spec: RecordingSpec, ventilator: VentilatorConfig) -> DisplacementModel:
    """The displacement model a recording spec encodes (intercepts 0)."""
    return DisplacementModel(
        q1_ap=spec.amplitude_ap_mm / ventilator.tv_max_ml,
        q1_si=spec.amplitude_si_mm / ventilator.tv_max_ml,
        q1_lr=spec.amplitude_lr_mm / ventilator.tv_max_ml,
    )


def generate_synthetic(
    spec: RecordingSpec,
    ventilator: VentilatorConfig,
    displacement_csv: Path,
    tv_csv: Path,
) -> DisplacementModel:
    """Write a synthetic displacement/tidal-volume recording pair.

    Displacement is the linear model applied to the ventilator tidal
    volume plus seeded noise, sampled at 8 Hz; tidal volume is sampled
    at 64 Hz.  Returns the generating model.
    """
    coeffs = solve_flow_coefficients(ventilator).coefficients
    model = synthetic_model(spec, ventilator)
    rng = np.random.default_rng(spec.seed)

    t_tv = np.arange(0.0, spec.duration_s, 1.0 / TV_RATE_HZ)
    tv_vals = tidal_volume_series(t_tv, coeffs).values
    write_csv(Path(tv_csv), TV_COLUMNS, zip(t_tv.tolist(), tv_vals.tolist()))

    t_d = np.arange(0.0, spec.duration_s, 1.0 / DISPLACEMENT_RATE_HZ)
    tv_at_d = tidal_volume_series(t_d, coeffs).values
    noise = rng.normal(0.0, spec.noise_std_mm, size=(3, len(t_d))) if spec.noise_std_mm > 0 else np.zeros((3, len(t_d)))
    d_ap = model.q1_ap * tv_at_d + noise[0]
    d_si = model.q1_si * tv_at_d + noise[1]
    d_lr = model.q1_lr * tv_at_d + noise[2]
    write_csv(
        Path(displacement_csv),
        DISPLACEMENT_COLUMNS,
        zip(t_d.tolist(), d_ap.tolist(), d_si.tolist(), d_lr.tolist()),
    )
    return model


def sha256_of(path: Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(
    out_dir: Path,
    command: str,
    config_path: Path | None,
    seed: int | None,
    artifacts: list[Path],
) -> Path:
    """Record the command, inputs and output checksums for reproduction."""
    out_dir = Path(out_dir)
    manifest = {
        "command": command,
        "config": str(config_path) if config_path else None,
        "seed": seed,
        "output_dir": str(out_dir),
        "artifacts": [
            {"path": str(Path(p).relative_to(out_dir)), "sha256": sha256_of(p)}
            for p in artifacts
        ],
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
