"""Instrument traces, unit conversions and CSV tables.

Input formats
-------------
* optical spectrum analyser: ``wavelength_nm,power_dbm``
* oscilloscope: ``time_s,voltage_v`` plus a label sidecar ``start_s,end_s,bit``

Output tables carry ``#``-prefixed metadata lines (tool version, config hash,
seed) above the header row.  Floats are written with ``repr`` so that a
write/read cycle is exact and reruns are byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from covertlink import __version__
from covertlink.errors import DomainError, IngestionError
from covertlink.receivers import HomodyneStats

__all__ = [
    "LIGHT_SPEED",
    "PLANCK",
    "OsaTrace",
    "ScopeTrace",
    "config_hash",
    "dbm_to_watts",
    "estimate_levels",
    "format_csv",
    "photons_per_mode_from_osa",
    "read_osa_csv",
    "read_scope_csv",
    "read_table",
    "write_osa_csv",
    "write_scope_csv",
    "write_table",
]

PLANCK = 6.62607015e-34
LIGHT_SPEED = 2.99792458e8


def dbm_to_watts(p_dbm):
    """``10 ** ((p_dbm - 30) / 10)``; ``-inf`` dBm maps to zero."""
    out = np.power(10.0, (np.asarray(p_dbm, dtype=float) - 30.0) / 10.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class OsaTrace:
    """Spectrum samples ``(wavelength nm, power dBm)``.

    ``peak_lambda`` defaults to the wavelength of the strongest sample.
    """

    samples: np.ndarray
    resolution_r: float = 0.02
    peak_lambda: float | None = None

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "samples", arr)
        if arr.shape[0] == 0:
            raise IngestionError("empty spectrum")
        if np.any(np.diff(arr[:, 0]) <= 0):
            raise IngestionError("wavelengths must be strictly increasing")
        if not self.resolution_r > 0:
            raise DomainError("resolution bandwidth must be positive")

    @property
    def peak_index(self) -> int:
        if self.peak_lambda is None:
            return int(np.argmax(self.samples[:, 1]))
        return int(np.argmin(np.abs(self.samples[:, 0] - self.peak_lambda)))

    @property
    def peak_power_dbm(self) -> float:
        return float(self.samples[self.peak_index, 1])


def photons_per_mode_from_osa(trace: OsaTrace) -> float:
    """Mean photon number per mode at the spectral peak.

    ``(S / r) lambda^3 / (h c^2)`` with ``S`` the peak power in watts inside
    the resolution bandwidth ``r``, both lengths in metres.
    """
    S = dbm_to_watts(trace.peak_power_dbm)
    if S < 0 or math.isnan(S):
        raise DomainError("spectral power must be non-negative")
    lam = trace.samples[trace.peak_index, 0] * 1e-9
    r = trace.resolution_r * 1e-9
    return S / r * lam**3 / (PLANCK * LIGHT_SPEED**2)


@dataclass(frozen=True)
class ScopeTrace:
    """Oscilloscope record with labelled bit windows ``[start, end)``."""

    times: np.ndarray
    voltages: np.ndarray
    labels: list = field(default_factory=list)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.voltages, dtype=float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "voltages", v)
        if t.shape != v.shape or t.ndim != 1:
            raise IngestionError("time and voltage columns differ in length")
        labels = sorted((float(a), float(b), int(c)) for a, b, c in self.labels)
        object.__setattr__(self, "labels", labels)
        for (s0, e0, _), (s1, _e1, _) in zip(labels, labels[1:]):
            if s1 < e0:
                raise IngestionError("label windows overlap")
        # one sample period of slack at either end of the record
        dt = float(np.median(np.diff(t))) if t.size > 1 else 0.0
        slack = dt + 1e-9 * (abs(t[-1]) + abs(t[0]) if t.size else 0.0)
        for s, e, bit in labels:
            if not e > s:
                raise IngestionError("label window with end <= start")
            if bit not in (0, 1):
                raise IngestionError(f"label bit must be 0 or 1, got {bit}")
            if t.size and (s < t[0] - slack or e > t[-1] + slack):
                raise IngestionError("label window outside the trace")


def estimate_levels(trace: ScopeTrace, z_alpha: float = 1.96) -> HomodyneStats:
    """Per-class sample mean and unbiased standard deviation over labelled windows."""
    if not trace.labels:
        raise IngestionError("no labelled windows")
    classes = {0: [], 1: []}
    for s, e, bit in trace.labels:
        sel = (trace.times >= s) & (trace.times < e)
        classes[bit].append(trace.voltages[sel])
    stats = {}
    for bit, chunks in classes.items():
        v = np.concatenate(chunks) if chunks else np.empty(0)
        if v.size < 2:
            raise IngestionError(f"class {bit} has {v.size} samples; need at least 2")
        stats[bit] = (float(v.mean()), float(v.std(ddof=1)), v.size)
    return HomodyneStats(
        V0=stats[0][0],
        V1=stats[1][0],
        sigma0=stats[0][1],
        sigma1=stats[1][1],
        n_d=min(stats[0][2], stats[1][2]),
        z_alpha=z_alpha,
    )


# --------------------------------------------------------------------------
# CSV


def _read_rows(path, columns):
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != list(columns):
        raise IngestionError(f"{path}: expected header {','.join(columns)}, got {header}")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(columns):
            raise IngestionError(f"{path}:{lineno}: expected {len(columns)} fields")
        try:
            rows.append([float(x) for x in row])
        except ValueError as exc:
            raise IngestionError(f"{path}:{lineno}: {exc}") from exc
    return np.array(rows, dtype=float).reshape(-1, len(columns))


def _write_rows(path, columns, rows):
    body = [",".join(columns)] + [",".join(_fmt(v) for v in row) for row in rows]
    Path(path).write_text("\n".join(body) + "\n")


def read_osa_csv(path, resolution_r: float = 0.02, peak_lambda: float | None = None) -> OsaTrace:
    return OsaTrace(_read_rows(path, ("wavelength_nm", "power_dbm")), resolution_r, peak_lambda)


def write_osa_csv(path, trace: OsaTrace) -> None:
    _write_rows(path, ("wavelength_nm", "power_dbm"), trace.samples.tolist())


def read_scope_csv(path, labels_path) -> ScopeTrace:
    data = _read_rows(path, ("time_s", "voltage_v"))
    labels = _read_rows(labels_path, ("start_s", "end_s", "bit"))
    if np.any((labels[:, 2] != 0) & (labels[:, 2] != 1)):
        raise IngestionError(f"{labels_path}: bit column must hold 0 or 1")
    return ScopeTrace(data[:, 0], data[:, 1], [(a, b, int(c)) for a, b, c in labels])


def write_scope_csv(path, labels_path, trace: ScopeTrace) -> None:
    _write_rows(path, ("time_s", "voltage_v"), np.column_stack([trace.times, trace.voltages]).tolist())
    _write_rows(labels_path, ("start_s", "end_s", "bit"), [(a, b, int(c)) for a, b, c in trace.labels])


# --------------------------------------------------------------------------
# result tables


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def format_csv(columns, rows, meta: dict | None = None) -> str:
    """CSV text with ``#`` metadata lines, a header row and ``repr`` floats."""
    meta = {"tool": f"covertlink {__version__}", **(meta or {})}
    lines = [f"# {k}: {v}" for k, v in meta.items()]
    lines.append(",".join(columns))
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def write_table(path, columns, rows, meta: dict | None = None) -> None:
    """Write rows as CSV (``#`` metadata lines first) or JSON, chosen by suffix."""
    path = Path(path)
    if path.suffix == ".json":
        doc = {
            "meta": {"tool": f"covertlink {__version__}", **(meta or {})},
            "columns": list(columns),
            "rows": [[_jsonable(v) for v in row] for row in rows],
        }
        path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    else:
        path.write_text(format_csv(columns, rows, meta))


def read_table(path) -> tuple[dict, list[str], list[list[str]]]:
    """Read a table written by :func:`write_table`; values stay strings for CSV."""
    path = Path(path)
    if path.suffix == ".json":
        doc = json.loads(path.read_text())
        return doc["meta"], doc["columns"], doc["rows"]
    meta, rows, columns = {}, [], None
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].partition(":")
            meta[key.strip()] = val.strip()
        elif columns is None:
            columns = line.split(",")
        elif line:
            rows.append(line.split(","))
    if columns is None:
        raise IngestionError(f"{path}: no header row")
    return meta, columns, rows
