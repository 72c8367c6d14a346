"""Serialization of fields, symbols, strip snapshots and tabular results."""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .paradiff import SampledSymbol
from .spectral import PeriodicGrid, SpectralField

FIELD_MAGIC = b"WWLF"
FIELD_VERSION = 1


# --- fields ------------------------------------------------------------------------------


def field_record(f: SpectralField) -> dict:
    """{dim, N, L, real, coeffs}: coefficients interleaved re/im in FFT order (C order in d = 2)."""
    c = f.coeffs.ravel()
    inter = np.empty(2 * c.size)
    inter[0::2] = c.real
    inter[1::2] = c.imag
    return {"dim": f.grid.dim, "N": f.grid.n, "L": f.grid.period, "real": bool(f.real), "coeffs": inter.tolist()}


def field_from_record(rec: dict) -> SpectralField:
    for key in ("dim", "N", "L", "coeffs"):
        if key not in rec:
            raise ValueError(f"field record lacks {key!r}")
    grid = PeriodicGrid(int(rec["dim"]), int(rec["N"]), float(rec["L"]))
    inter = np.asarray(rec["coeffs"], dtype=float)
    expected = 2 * grid.n**grid.dim
    if inter.size != expected:
        raise ValueError(f"field record holds {inter.size} numbers, expected {expected}")
    c = (inter[0::2] + 1j * inter[1::2]).reshape(grid.shape)
    return SpectralField(grid, c, bool(rec.get("real", True)))


def save_field_json(f: SpectralField, path) -> None:
    Path(path).write_text(json.dumps(field_record(f)))


def load_field_json(path) -> SpectralField:
    return field_from_record(json.loads(Path(path).read_text()))


def save_field_binary(f: SpectralField, path) -> None:
    """Little-endian: magic, version u32, dim u32, N u32, real u32, L f64, then interleaved f64 pairs."""
    c = f.coeffs.ravel()
    inter = np.empty(2 * c.size, dtype="<f8")
    inter[0::2] = c.real
    inter[1::2] = c.imag
    header = FIELD_MAGIC + struct.pack("<IIIId", FIELD_VERSION, f.grid.dim, f.grid.n, int(f.real), f.grid.period)
    Path(path).write_bytes(header + inter.tobytes())


def load_field_binary(path) -> SpectralField:
    raw = Path(path).read_bytes()
    if raw[:4] != FIELD_MAGIC:
        raise ValueError("not a field file (bad magic)")
    version, dim, n, real, period = struct.unpack("<IIIId", raw[4:28])
    if version != FIELD_VERSION:
        raise ValueError(f"unsupported field file version {version}")
    grid = PeriodicGrid(dim, n, period)
    inter = np.frombuffer(raw[28:], dtype="<f8")
    if inter.size != 2 * n**dim:
        raise ValueError("field file is truncated")
    return SpectralField(grid, (inter[0::2] + 1j * inter[1::2]).reshape(grid.shape), bool(real))


# --- symbols ---------------------------------------------------------------------------------


def dump_symbol(p: SampledSymbol, directory, name: str = "symbol") -> Path:
    """Write ``name.json`` plus one field record per tabulated xi under ``name_columns/``."""
    directory = Path(directory)
    coldir = directory / f"{name}_columns"
    coldir.mkdir(parents=True, exist_ok=True)
    grid = p.grid
    cols = []
    for i, xi in enumerate(p.freq_set):
        vals = p.values[:, i].reshape(grid.shape)
        real = bool(np.all(np.abs(vals.imag) <= 1e-14 * max(1.0, float(np.max(np.abs(vals))))))
        f = SpectralField.from_values(grid, vals.real if real else vals)
        ref = f"{name}_columns/xi_{i:05d}.json"
        save_field_json(f, directory / ref)
        cols.append({"xi": [float(v) for v in xi], "field": ref})
    doc = {
        "label": p.label,
        "order": p.order,
        "regularity": p.regularity if np.isfinite(p.regularity) else "inf",
        "grid": {"dim": grid.dim, "N": grid.n, "L": grid.period},
        "freq_set": [[float(v) for v in xi] for xi in p.freq_set],
        "columns": cols,
    }
    out = directory / f"{name}.json"
    out.write_text(json.dumps(doc, indent=1))
    return out


def load_symbol(path) -> SampledSymbol:
    path = Path(path)
    doc = json.loads(path.read_text())
    g = doc["grid"]
    grid = PeriodicGrid(int(g["dim"]), int(g["N"]), float(g["L"]))
    freq = np.asarray(doc["freq_set"], dtype=float).reshape(-1, grid.dim)
    values = np.empty((grid.n**grid.dim, len(freq)), dtype=np.complex128)
    for i, col in enumerate(doc["columns"]):
        f = load_field_json(path.parent / col["field"])
        if f.grid != grid:
            raise ValueError(f"column {i} lives on a different grid")
        values[:, i] = np.asarray(f.values).ravel()
    reg = doc["regularity"]
    return SampledSymbol(grid, freq, values, float(doc["order"]), float("inf") if reg == "inf" else float(reg),
                         doc.get("label", ""))


# --- strip snapshots ----------------------------------------------------------------------------


def save_strip_snapshot(solution, path, history_csv=None) -> None:
    """Upper-element potential per z level, plus the solver convergence history as CSV."""
    grid = solution.map.grid
    levels = []
    for z, v in zip(solution.map.z_levels, solution.v):
        levels.append({"z": float(z), "field": field_record(SpectralField.from_values(grid, v))})
    doc = {
        "z_levels": [float(z) for z in solution.map.z_levels],
        "map": solution.map.describe(),
        "levels": levels,
    }
    Path(path).write_text(json.dumps(doc))
    if history_csv is not None:
        write_rows_csv(history_csv, [{"iteration": i, "relative_residual": r} for i, r in enumerate(solution.history)])


def load_strip_snapshot(path):
    """Return (z_levels, list of SpectralField)."""
    doc = json.loads(Path(path).read_text())
    return np.asarray(doc["z_levels"]), [field_from_record(lv["field"]) for lv in doc["levels"]]


# --- tables -----------------------------------------------------------------------------------------


def write_rows_csv(path, rows, fieldnames=None) -> None:
    rows = list(rows)
    if fieldnames is None:
        fieldnames = []
        for r in rows:
            for k in r:
                if k not in fieldnames:
                    fieldnames.append(k)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fieldnames, restval="")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.items()})


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def read_rows_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


EXPERIMENT_COLUMNS = ["parameter", "measured", "fitted_slope", "residual"]


def write_experiment_csv(path, rows) -> None:
    """Experiment table with the fixed leading columns; extra keys follow."""
    rows = list(rows)
    extra = []
    for r in rows:
        for k in r:
            if k not in EXPERIMENT_COLUMNS and k not in extra:
                extra.append(k)
    write_rows_csv(path, rows, EXPERIMENT_COLUMNS + extra)


TRAJECTORY_COLUMNS = ["t", "energy", "drift", "min_a", "residual", "eta_l2", "psi_h1", "mean_eta"]


def write_trajectory_csv(path, rows) -> None:
    rows = list(rows)
    keys = [k for k in TRAJECTORY_COLUMNS if any(k in r for r in rows)]
    extra = [k for r in rows for k in r if k not in keys]
    write_rows_csv(path, rows, keys + list(dict.fromkeys(extra)))


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default))


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")
