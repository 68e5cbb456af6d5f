"""Serialization of experiment results: CSV data, JSON mirrors, metadata.

Every run writes three artifacts into the output directory:

- ``<kind>.csv``         the data table (one header line with units)
- ``<kind>.meta.json``   fully resolved config, tool version, wall time
- ``<kind>.summary.json``  detected strips / fitted parameters

With the JSON format enabled, ``<kind>.json`` mirrors the CSV fields as
``{"columns": [...], "rows": [...]}``.  Floats are written with repr so
identical runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .experiments import (
    RepeatedResetResult,
    RethermalizationResult,
    ScanGrid,
    TraceResult,
)
from .units import rad_to_mhz, s_to_ns


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, columns: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_json_mirror(path: Path, columns: list[str], rows: list[list]) -> None:
    payload = {
        "columns": columns,
        "rows": [
            [bool(v) if isinstance(v, (bool, np.bool_)) else v for v in row]
            for row in rows
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def grid_table(grid: ScanGrid) -> tuple[list[str], list[list]]:
    """Long-format table of a scan grid, row-major over (y, x)."""
    if grid.x.name == "amplitude":
        x_col, x_vals = "amplitude_phi0", list(grid.x.values)
    else:
        x_col, x_vals = "frequency1_mhz", [rad_to_mhz(v) for v in grid.x.values]
    if grid.y.name == "mod_frequency":
        y_col, y_vals = "frequency_mhz", [rad_to_mhz(v) for v in grid.y.values]
    else:
        y_col, y_vals = "frequency2_mhz", [rad_to_mhz(v) for v in grid.y.values]

    columns = [x_col, y_col, "p_g", "p_e"]
    if grid.p_f is not None:
        columns.append("p_f")
    columns += ["mean_photons", "success", "error"]

    error_map = {}
    for entry in grid.errors:
        loc, msg = entry.split(": ", 1)
        error_map[loc] = msg

    rows = []
    for i, yv in enumerate(y_vals):
        for j, xv in enumerate(x_vals):
            row = [xv, yv, grid.p_g[i, j], grid.p_e[i, j]]
            if grid.p_f is not None:
                row.append(grid.p_f[i, j])
            row.append(grid.mean_photons[i, j])
            row.append(bool(grid.success[i, j]))
            row.append(error_map.get(f"({i},{j})", ""))
            rows.append(row)
    return columns, rows


def trace_table(result: TraceResult) -> tuple[list[str], list[list]]:
    traj = result.trajectory
    columns = ["time_ns", "p_g", "p_e"]
    has_f = traj.hilbert.qubit_levels > 2
    if has_f:
        columns.append("p_f")
    columns.append("mean_photons")
    if result.theory_pe is not None:
        columns.append("theory_p_e")
    rows = []
    for i, t in enumerate(traj.t):
        row = [s_to_ns(t), traj.p_g[i], traj.p_e[i]]
        if has_f:
            row.append(traj.p_f[i])
        row.append(traj.mean_photons[i])
        if result.theory_pe is not None:
            row.append(result.theory_pe[i])
        rows.append(row)
    return columns, rows


def repeated_reset_table(result: RepeatedResetResult) -> tuple[list[str], list[list]]:
    columns = ["cycle", "residual"]
    rows = [[i + 1, r] for i, r in enumerate(result.residuals)]
    return columns, rows


def rethermalization_table(
    result: RethermalizationResult,
) -> tuple[list[str], list[list]]:
    columns = ["time_ns", "p_e"]
    rows = [[s_to_ns(t), p] for t, p in zip(result.t, result.p_e)]
    return columns, rows


def write_result(
    out_dir: Path,
    kind: str,
    columns: list[str],
    rows: list[list],
    metadata: dict,
    summary: dict,
    formats: tuple[str, ...],
) -> list[Path]:
    """Write data/meta/summary artifacts; returns the paths written."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        path = out_dir / f"{kind}.csv"
        _write_csv(path, columns, rows)
        written.append(path)
    if "json" in formats:
        path = out_dir / f"{kind}.json"
        _write_json_mirror(path, columns, rows)
        written.append(path)
    meta_path = out_dir / f"{kind}.meta.json"
    with open(meta_path, "w") as fh:
        json.dump(metadata, fh, indent=1, default=_json_default)
        fh.write("\n")
    written.append(meta_path)
    summary_path = out_dir / f"{kind}.summary.json"
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=1, default=_json_default)
        fh.write("\n")
    written.append(summary_path)
    return written


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")
