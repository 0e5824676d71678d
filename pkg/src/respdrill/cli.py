"""Command-line entry point.

Subcommands: solve-ventilator, generate, fit, denoise, simulate, batch,
plot.  Every command writes its outputs plus a manifest.json with
checksums into the output directory; reruns with the same config and
seed reproduce the files byte for byte.  The default config path can be
set with the RESPDRILL_CONFIG environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import fitting, plotting, wavelets
from .config import AppConfig, ConfigError, load_config
from .io import (
    IngestError,
    RecordingSpec,
    generate_synthetic,
    ingest,
    write_csv,
    write_manifest,
)
from .respiration import SolverError, solve_flow_coefficients
from .simulator import FaultInjection, Mode, TrialConfig, TrialResult, run_batch, run_trial

CONFIG_ENV = "RESPDRILL_CONFIG"


def _trial_config(cfg: AppConfig, mode: Mode, rpm: float, seed: int,
                  fault: FaultInjection | None = None) -> TrialConfig:
    return TrialConfig(
        mode=mode,
        feed_rate_mm_s=cfg.plant.feed_rate_mm_s,
        spindle_rpm=rpm,
        tick_s=cfg.plant.tick_s,
        ventilator=cfg.ventilator,
        recognizer=cfg.recognizer,
        monitor=cfg.monitor,
        bone=cfg.bone,
        force_block=cfg.plant.force_block,
        seed=seed,
        fault=fault,
    )


def _write_trial_outputs(result: TrialResult, out: Path) -> list[Path]:
    files = []
    tr = result.traces
    if tr is not None:
        trace_path = out / "trace.csv"
        write_csv(
            trace_path,
            plotting.TRACE_COLUMNS,
            zip(
                tr.t_s.tolist(),
                tr.force_n.tolist(),
                tr.bone_ap_mm.tolist(),
                tr.tool_mm.tolist(),
                tr.depth_mm.tolist(),
            ),
        )
        files.append(trace_path)
        dec_path = out / "decisions.csv"
        write_csv(
            dec_path,
            plotting.DECISION_COLUMNS,
            [
                (i + 1, float(tr.block_t_s[i]), float(tr.block_f_bar_n[i]),
                 float(tr.block_a_star[i]), tr.block_phase[i], tr.block_decision[i])
                for i in range(len(tr.block_t_s))
            ],
        )
        files.append(dec_path)
    summary_path = out / "trial.json"
    summary_path.write_text(
        json.dumps(
            {
                "mode": result.mode.value,
                "seed": result.seed,
                "stop_depth_mm": result.stop_depth_mm,
                "residual_mm": result.residual_mm,
                "success": result.success,
                "f_out_n": result.f_out_n,
                "f_in_n": result.f_in_n,
                "stop_reason": result.stop_reason,
                "abort_reason": result.abort_reason.value if result.abort_reason else None,
                "stop_time_s": result.stop_time_s,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    files.append(summary_path)
    return files


def _cmd_solve_ventilator(args, cfg: AppConfig, out: Path) -> list[Path]:
    report = solve_flow_coefficients(cfg.ventilator)
    c = report.coefficients
    path = out / "ventilator_solution.json"
    path.write_text(
        json.dumps(
            {
                "a_ml_s": c.a,
                "b_per_s": c.b,
                "c_ml_s": c.c,
                "t_inhale_s": c.t_inhale,
                "period_s": c.period,
                "residual_asymptote": report.residual_asymptote,
                "residual_volume_ml": report.residual_volume,
                "boundary_flow_ml_s": report.boundary_flow_ml_s,
                "iterations": report.iterations,
                "reference_delta_b_relative": report.reference_delta_b,
                "reference_delta_c_absolute": report.reference_delta_c,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    print(f"a = {c.a:.6g} ml/s, b = {c.b:.6g}, c = {c.c:.6g} "
          f"(residuals {report.residual_asymptote:.2e}, {report.residual_volume:.2e})")
    return [path]


def _cmd_generate(args, cfg: AppConfig, out: Path) -> list[Path]:
    spec = RecordingSpec(
        amplitude_ap_mm=args.amplitude_ap,
        amplitude_si_mm=args.amplitude_si,
        amplitude_lr_mm=args.amplitude_lr,
        noise_std_mm=args.noise_std,
        duration_s=args.duration,
        seed=args.seed,
    )
    disp = out / "displacement.csv"
    tv = out / "tidal_volume.csv"
    model = generate_synthetic(spec, cfg.ventilator, disp, tv)
    print(f"wrote {disp} and {tv} (q1_ap={model.q1_ap:.6g} mm/ml)")
    return [disp, tv]


def _cmd_fit(args, cfg: AppConfig, out: Path) -> list[Path]:
    rec = ingest(Path(args.displacement), Path(args.tidal_volume))
    print(f"ingested {rec.row_count} aligned rows")
    pso_cfg = fitting.PsoConfig(
        population=cfg.pso.population,
        max_iterations=cfg.pso.max_iterations,
        inertia=cfg.pso.inertia,
        cognitive=cfg.pso.cognitive,
        social=cfg.pso.social,
        seed=args.seed,
    )
    axes = {"ap": rec.d_ap_mm, "si": rec.d_si_mm, "lr": rec.d_lr_mm}
    rows = []
    for axis, disp in axes.items():
        swarm = fitting.fit_pso(rec.tv_ml, disp, pso_cfg)
        q1_ols, q0_ols = fitting.fit_ols(rec.tv_ml, disp)
        r2_ols = fitting.r_squared((q1_ols, q0_ols), rec.tv_ml, disp)
        rows.append(
            (axis, float(swarm.params[0]), float(swarm.params[1]), float(swarm.r2),
             swarm.iterations_used, float(q1_ols), float(q0_ols), float(r2_ols))
        )
        print(f"{axis}: q1={swarm.params[0]:.6g} q0={swarm.params[1]:.6g} "
              f"R2={swarm.r2:.4f} (OLS R2={r2_ols:.4f})")
        pso_cfg = fitting.PsoConfig(
            population=pso_cfg.population,
            max_iterations=pso_cfg.max_iterations,
            inertia=pso_cfg.inertia,
            cognitive=pso_cfg.cognitive,
            social=pso_cfg.social,
            seed=pso_cfg.seed + 1,
        )
    path = out / "fit_results.csv"
    write_csv(
        path,
        ["axis", "q1_mm_per_ml", "q0_mm", "r2", "iterations", "q1_ols", "q0_ols", "r2_ols"],
        rows,
    )
    return [path]


def _cmd_denoise(args, cfg: AppConfig, out: Path) -> list[Path]:
    rec = ingest(Path(args.displacement), Path(args.tidal_volume))
    axes = {"ap": rec.d_ap_mm, "si": rec.d_si_mm, "lr": rec.d_lr_mm}
    files = []
    denoised = {}
    score_rows = []
    chosen = {}
    for axis, signal in axes.items():
        if args.basis:
            basis = args.basis
        else:
            basis, table = wavelets.select_basis(
                signal,
                rec.tv_ml,
                list(cfg.signal.candidates),
                weights=cfg.signal.weights,
                levels=cfg.signal.levels,
                delta_tv=cfg.signal.delta_tv_fraction * float(rec.tv_ml.max()),
            )
            for name, (nsr, w_max, w_mean) in zip(cfg.signal.candidates, table):
                score_rows.append((axis, name, float(nsr), float(w_max), float(w_mean)))
        chosen[axis] = basis
        denoised[axis] = wavelets.denoise(signal, basis, levels=cfg.signal.levels)
        print(f"{axis}: basis {basis}")
    path = out / "denoised.csv"
    write_csv(
        path,
        ["t_s", "d_ap_mm", "d_si_mm", "d_lr_mm", "basis_ap", "basis_si", "basis_lr"],
        (
            (float(rec.t_s[i]), float(denoised["ap"][i]), float(denoised["si"][i]),
             float(denoised["lr"][i]), chosen["ap"], chosen["si"], chosen["lr"])
            for i in range(rec.row_count)
        ),
    )
    files.append(path)
    if score_rows:
        score_path = out / "basis_scores.csv"
        write_csv(score_path, ["axis", "basis", "nsr", "w_max_mm", "w_mean_mm"], score_rows)
        files.append(score_path)
    return files


def _parse_mode(name: str) -> Mode:
    for mode in Mode:
        if mode.value == name:
            return mode
    raise argparse.ArgumentTypeError(f"unknown mode {name!r}; choose from "
                                     f"{[m.value for m in Mode]}")


def _cmd_simulate(args, cfg: AppConfig, out: Path) -> list[Path]:
    fault = None
    if args.inject_position or args.inject_force:
        fault = FaultInjection(
            time_s=args.inject_at,
            position_offset_mm=args.inject_position,
            force_offset_n=args.inject_force,
        )
    trial_cfg = _trial_config(cfg, args.mode, args.rpm, args.seed, fault)
    result = run_trial(trial_cfg, keep_traces=True)
    print(f"{result.mode.value}: {result.stop_reason} at depth {result.stop_depth_mm:.2f} mm, "
          f"residual {result.residual_mm:.2f} mm, success={result.success}")
    return _write_trial_outputs(result, out)


def _cmd_batch(args, cfg: AppConfig, out: Path) -> list[Path]:
    trial_cfg = _trial_config(cfg, args.mode, args.rpm, args.seed)
    summary = run_batch(args.n, trial_cfg, keep_traces=False)
    rows = [
        (
            i,
            r.seed,
            r.mode.value,
            float(args.rpm),
            str(r.success),
            r.stop_depth_mm,
            r.residual_mm,
            r.f_out_n,
            r.f_in_n,
            r.stop_reason,
            r.abort_reason.value if r.abort_reason else "",
        )
        for i, r in enumerate(summary.results)
    ]
    path = out / "batch_summary.csv"
    write_csv(path, plotting.BATCH_COLUMNS, rows)
    stats_path = out / "batch_stats.json"
    stats_path.write_text(
        json.dumps(
            {
                "mode": summary.mode.value,
                "n": summary.n,
                "base_seed": summary.base_seed,
                "spindle_rpm": args.rpm,
                "success_rate": summary.success_rate,
                "median_f_out_n": summary.median_f_out,
                "median_f_in_n": summary.median_f_in,
                "median_residual_mm": float(np.median(summary.residuals)),
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    print(f"{summary.mode.value} x{summary.n}: success rate {summary.success_rate:.2f}, "
          f"median f_out {summary.median_f_out:.2f} N, median f_in {summary.median_f_in:.2f} N")
    if args.traces:
        files = [path, stats_path]
        for i in range(args.n):
            tr_cfg = _trial_config(cfg, args.mode, args.rpm, args.seed + i)
            result = run_trial(tr_cfg, keep_traces=True)
            trial_dir = out / f"trial_{i:03d}"
            trial_dir.mkdir(parents=True, exist_ok=True)
            files.extend(_write_trial_outputs(result, trial_dir))
        return files
    return [path, stats_path]


def _cmd_plot(args, cfg: AppConfig, out: Path) -> list[Path]:
    if args.kind == "force":
        target = out / "force_trace.svg"
        plotting.plot_force_trace(Path(args.inputs[0]), Path(args.inputs[1]), target)
    elif args.kind == "residuals":
        target = out / "residuals.svg"
        plotting.plot_residuals(Path(args.inputs[0]), target)
    else:
        target = out / "success_rates.svg"
        plotting.plot_success_rates([Path(p) for p in args.inputs], target)
    print(f"wrote {target}")
    return [target]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="respdrill",
        description="Respiration-compensated drilling: model fitting, "
                    "de-noising, and closed-loop trial simulation.",
    )
    parser.add_argument("--config", type=Path, default=None,
                        help=f"config file (default: ${CONFIG_ENV} if set)")
    parser.add_argument("--out", type=Path, default=Path("out"),
                        help="output directory (default: ./out)")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("solve-ventilator", help="solve the flow-curve coefficients")

    p = sub.add_parser("generate", help="write a synthetic recording pair")
    p.add_argument("--duration", type=float, default=30.0)
    p.add_argument("--noise-std", type=float, default=0.1, help="mm")
    p.add_argument("--amplitude-ap", type=float, default=4.0, help="mm at full tidal volume")
    p.add_argument("--amplitude-si", type=float, default=2.0)
    p.add_argument("--amplitude-lr", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("fit", help="identify the displacement model from recordings")
    p.add_argument("--displacement", required=True)
    p.add_argument("--tidal-volume", required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("denoise", help="wavelet de-noise a displacement recording")
    p.add_argument("--displacement", required=True)
    p.add_argument("--tidal-volume", required=True)
    p.add_argument("--basis", default=None,
                   help="fix the basis instead of selecting by weighted metrics")

    p = sub.add_parser("simulate", help="run one drilling trial")
    p.add_argument("--mode", type=_parse_mode, default=Mode.STATIONARY,
                   help="stationary | uncompensated | compensated")
    p.add_argument("--rpm", type=float, default=12000.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject-at", type=float, default=0.0, help="fault time (s)")
    p.add_argument("--inject-position", type=float, default=0.0, help="mm step")
    p.add_argument("--inject-force", type=float, default=0.0, help="N step")

    p = sub.add_parser("batch", help="run a seeded batch of trials")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--mode", type=_parse_mode, default=Mode.STATIONARY)
    p.add_argument("--rpm", type=float, default=12000.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--traces", action="store_true", help="also write per-trial traces")

    p = sub.add_parser("plot", help="render stored CSVs to vector graphics")
    p.add_argument("--kind", choices=("force", "residuals", "success"), required=True)
    p.add_argument("inputs", nargs="+",
                   help="force: trace.csv decisions.csv | residuals: batch_summary.csv "
                        "| success: one batch_summary.csv per bar")

    return parser


_HANDLERS = {
    "solve-ventilator": _cmd_solve_ventilator,
    "generate": _cmd_generate,
    "fit": _cmd_fit,
    "denoise": _cmd_denoise,
    "simulate": _cmd_simulate,
    "batch": _cmd_batch,
    "plot": _cmd_plot,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config_path = args.config
    if config_path is None and os.environ.get(CONFIG_ENV):
        config_path = Path(os.environ[CONFIG_ENV])
    try:
        cfg = load_config(config_path)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        artifacts = _HANDLERS[args.command](args, cfg, out)
        write_manifest(out, args.command, config_path, getattr(args, "seed", None), artifacts)
    except (ConfigError, IngestError, SolverError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
