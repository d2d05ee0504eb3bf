"""Run persistence: CSV series, JSON reports, and the per-run manifest.

All numeric CSV payloads are written with %.17g so float64 values
round-trip bitwise.  JSON reports carry a schema version; readers reject
mismatched schemas instead of guessing.
"""
from __future__ import annotations

import json
import platform
from pathlib import Path

import numpy as np
import scipy

from .config import config_to_dict
from .core import Grid1D, RunConfig
from .forward import Measurement

SCHEMA_VERSION = 1


def write_series_csv(path, t, values) -> None:
    """Complex series as rows t, re, im (header included)."""
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=complex)
    if t.shape != values.shape or t.ndim != 1:
        raise ValueError(f"shape mismatch: t {t.shape} vs values {values.shape}")
    with open(path, "w") as fh:
        fh.write("t,re,im\n")
        for tj, vj in zip(t, values):
            fh.write(f"{tj:.17g},{vj.real:.17g},{vj.imag:.17g}\n")


def read_series_csv(path):
    """Inverse of write_series_csv; returns (t, complex values)."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 3:
        raise ValueError(
            f"{path}: expected 3 columns (t, re, im), found {data.shape[1]}")
    return data[:, 0], data[:, 1] + 1j * data[:, 2]


def write_measurement(path, measurement: Measurement, grid: Grid1D) -> None:
    """Flux series on the [0, T] sub-grid; noise metadata travels in the
    run manifest, not the CSV."""
    if measurement.flux.shape != (grid.nt_half + 1,):
        raise ValueError(
            f"measurement length {measurement.flux.shape[0]} does not match "
            f"time sub-grid ({grid.nt_half + 1})")
    write_series_csv(path, grid.t_half, measurement.flux)


def read_measurement(path, grid: Grid1D, sigma: float = 0.0,
                     seed: int = 0) -> Measurement:
    """Read a flux CSV and validate its length against the grid."""
    t, flux = read_series_csv(path)
    expected = grid.nt_half + 1
    if flux.shape[0] != expected:
        raise ValueError(
            f"{path}: expected {expected} rows for the time sub-grid, "
            f"found {flux.shape[0]}")
    return Measurement(flux=flux, sigma=sigma, seed=seed)


def write_report(path, payload: dict) -> None:
    """Schema-versioned JSON report."""
    body = {"schema_version": SCHEMA_VERSION}
    body.update(payload)
    with open(path, "w") as fh:
        json.dump(body, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def read_report(path) -> dict:
    with open(path) as fh:
        body = json.load(fh)
    found = body.get("schema_version")
    if found != SCHEMA_VERSION:
        raise ValueError(
            f"{path}: schema_version {found!r} does not match "
            f"expected {SCHEMA_VERSION}")
    return body


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_manifest(out_dir, config: RunConfig, seed: int, outputs: list[str],
                   wall_time_s: float, extra: dict | None = None) -> Path:
    """Manifest JSON beside the run outputs: config echo, seed, versions,
    wall time, and the list of files the run produced."""
    from . import __version__

    body = {
        "schema_version": SCHEMA_VERSION,
        "config": config_to_dict(config),
        "seed": seed,
        "outputs": sorted(outputs),
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "artifact": __version__,
        },
        "wall_time_s": wall_time_s,
    }
    if extra:
        body.update(extra)
    path = Path(out_dir) / "manifest.json"
    with open(path, "w") as fh:
        json.dump(body, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def write_table_csv(path, header: list[str], rows) -> None:
    """Generic numeric/str table with %.17g float formatting."""
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for cell in row:
                if isinstance(cell, float):
                    cells.append(f"{cell:.17g}")
                elif cell is None:
                    cells.append("")
                else:
                    cells.append(str(cell))
            fh.write(",".join(cells) + "\n")
