"""Command-line interface: one subcommand per experiment kind, plus validate.

Exit codes: 0 success, 2 configuration error, 3 integration failure
(including scans with failed cells; partial results are still written),
4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import parse_config
from .errors import ConfigError, FluxresetError, IntegrationError
from .experiments import (
    assign_strip_orders,
    detect_strips,
    detect_two_tone_lines,
    default_workers,
    first_local_minimum,
    repeated_reset,
    rethermalization,
    single_tone_scan,
    time_trace,
    two_tone_scan,
    two_tone_trace,
)
from .runio import (
    grid_table,
    repeated_reset_table,
    rethermalization_table,
    trace_table,
    write_result,
)
from .units import rad_to_mhz, s_to_ns

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTEGRATION = 3
EXIT_IO = 4

_KIND_BY_COMMAND = {
    "single-tone-scan": "single_tone_scan",
    "two-tone-scan": "two_tone_scan",
    "time-trace": "time_trace",
    "two-tone-trace": "two_tone_trace",
    "repeated-reset": "repeated_reset",
    "rethermalization": "rethermalization",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fluxreset",
        description="Parametric flux-modulation qubit reset simulator",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(_KIND_BY_COMMAND) + ["validate"]:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument(
            "--threads",
            type=int,
            default=None,
            help="worker processes (default: FLUXRESET_THREADS or CPU count)",
        )
        p.add_argument(
            "--format", choices=("csv", "json"), default=None, help="output format"
        )
    return parser


def _load_config(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    return parse_config(text)


def _progress_printer(total_label: str):
    state = {"last": -1}

    def progress(done: int, total: int):
        pct = (10 * done) // total
        if pct > state["last"]:
            state["last"] = pct
            print(f"{total_label}: {done}/{total} cells", flush=True)

    return progress


def _scan_summary_single(grid) -> dict:
    from .device import TransmonSpec
    from .experiments import amplitude_shift_function

    dev = grid.metadata["device"]
    transmon = TransmonSpec(
        omega_max=dev["omega_max"],
        eta=dev["eta"],
        flux_validity=dev["flux_validity"],
    )
    regressor = amplitude_shift_function(transmon, grid.metadata["park_flux"])
    strips = detect_strips(grid, shift_regressor=regressor)
    delta0 = grid.metadata["delta_bar_zero_amplitude"]
    assign_strip_orders(strips, delta0)
    return {
        "delta_bar_zero_amplitude_mhz": rad_to_mhz(delta0),
        "strips": [
            {
                "order": s.order,
                "center_zero_amplitude_mhz": rad_to_mhz(s.center_zero_amplitude),
                "expected_mhz": rad_to_mhz(-delta0 / (2 * s.order)),
                "cells": len(s.cells),
            }
            for s in strips
        ],
        "failed_cells": int((~grid.success).sum()),
    }


def _scan_summary_two_tone(grid) -> dict:
    # Near-degenerate tones coadd; exclude that band from line fitting.
    band = 2.0 * np.pi * 100e6
    summary = {
        "gap_e_mhz": rad_to_mhz(grid.metadata["gap_e"]),
        "gap_f_mhz": rad_to_mhz(grid.metadata["gap_f"]),
        "delta_bar_mhz": rad_to_mhz(grid.metadata["delta_bar"]),
        "failed_cells": int((~grid.success).sum()),
    }
    if grid.p_f is not None and np.isfinite(grid.p_f).any():
        f_lines = detect_two_tone_lines(
            grid, observable="p_f", threshold=0.5, exclude_degenerate_band=band
        )
        summary["f_lines_mhz"] = {
            "vertical": [rad_to_mhz(v) for v in f_lines.vertical],
            "horizontal": [rad_to_mhz(v) for v in f_lines.horizontal],
            "antidiagonal": [rad_to_mhz(v) for v in f_lines.antidiagonal],
        }
    if grid.metadata.get("initial_state") == "e":
        e_lines = detect_two_tone_lines(
            grid, observable="p_e", threshold=0.5, exclude_degenerate_band=band
        )
        summary["e_lines_mhz"] = {
            "vertical": [rad_to_mhz(v) for v in e_lines.vertical],
            "horizontal": [rad_to_mhz(v) for v in e_lines.horizontal],
            "antidiagonal": [rad_to_mhz(v) for v in e_lines.antidiagonal],
        }
    return summary


def _first_minimum_ns(traj):
    try:
        return s_to_ns(first_local_minimum(traj.t, traj.p_e))
    except FluxresetError:
        return None


def _run_experiment(kind: str, config, workers: int):
    spec = config.experiment_spec()
    if kind.endswith("_scan"):
        progress = _progress_printer(kind)
        if kind == "single_tone_scan":
            grid = single_tone_scan(spec, workers=workers, progress=progress)
            return grid, grid_table(grid), _scan_summary_single(grid)
        grid = two_tone_scan(spec, workers=workers, progress=progress)
        return grid, grid_table(grid), _scan_summary_two_tone(grid)
    if kind == "time_trace":
        res = time_trace(spec)
        traj = res.trajectory
        summary = {
            "fit": res.fit,
            "g_n_abs_mhz": rad_to_mhz(res.metadata["g_n_abs"]),
            "kappa_r_fit_inverse_ns": 1e9 / res.fit["kappa_r"],
            "first_minimum_ns": _first_minimum_ns(traj),
            "final_p_e": float(traj.p_e[-1]),
        }
        return res, trace_table(res), summary
    if kind == "two_tone_trace":
        res = two_tone_trace(spec)
        summary = {
            "cascade_gamma_fe_per_ns": res.fit["gamma_fe"] * 1e-9,
            "cascade_gamma_eg_per_ns": res.fit["gamma_eg"] * 1e-9,
            "final_1_minus_p_g": float(1.0 - res.trajectory.p_g[-1]),
        }
        return res, trace_table(res), summary
    if kind == "repeated_reset":
        res = repeated_reset(spec)
        summary = {
            "cycles": int(res.residuals.size),
            "mean_residual": float(res.residuals[res.burn_in :].mean()),
            "slope_per_cycle": res.slope,
            "slope_ci95": list(res.slope_ci),
            "burn_in": res.burn_in,
        }
        return res, repeated_reset_table(res), summary
    if kind == "rethermalization":
        res = rethermalization(spec)
        summary = {
            "fitted_time_constant_us": res.fitted_time_constant * 1e6,
            "asymptote": res.asymptote,
            "model_time_constant_us": 1e6 / res.metadata["gamma_total"],
            "steady_state": res.metadata["steady_state"],
        }
        return res, rethermalization_table(res), summary
    raise ConfigError(f"unsupported experiment kind {kind}")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    try:
        config = _load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate":
        try:
            config.experiment_spec()  # full cross-field validation
        except (ConfigError, ValueError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"OK: {args.config} ({config.experiment.kind})")
        return EXIT_OK

    kind = _KIND_BY_COMMAND[args.command]
    if config.experiment.kind != kind:
        print(
            f"config error: config declares kind '{config.experiment.kind}' "
            f"but the subcommand expects '{kind}'",
            file=sys.stderr,
        )
        return EXIT_CONFIG

    workers = args.threads if args.threads is not None else default_workers()
    out_dir = Path(args.out if args.out is not None else config.output.directory)
    formats = (args.format,) if args.format else config.output.formats

    start = time.perf_counter()
    try:
        result, (columns, rows), summary = _run_experiment(kind, config, workers)
    except IntegrationError as exc:
        print(f"integration error: {exc} (t={exc.t_reached})", file=sys.stderr)
        return EXIT_INTEGRATION
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FluxresetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    wall = time.perf_counter() - start

    metadata = {
        "config": config.to_dict(),
        "version": __version__,
        "wall_time_s": wall,
        "workers": workers,
    }
    if hasattr(result, "metadata"):
        metadata["resolved"] = result.metadata

    try:
        written = write_result(
            out_dir, kind, columns, rows, metadata, summary, formats
        )
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO

    for path in written:
        print(f"wrote {path}")
    failed = summary.get("failed_cells", 0)
    if failed:
        print(f"{failed} cell(s) failed; see the error column", file=sys.stderr)
        return EXIT_INTEGRATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
